#include <algorithm>
#include <set>

#include "xids/survey/survey.hpp"

namespace xids::survey {

const LikertItem* Instrument::find(const std::string& item_id) const {
  for (const auto& item : items) {
    if (item.id == item_id) return &item;
  }
  return nullptr;
}

std::vector<const LikertItem*> Instrument::items_of(const std::string& construct) const {
  std::vector<const LikertItem*> out;
  for (const auto& item : items) {
    if (item.construct == construct) out.push_back(&item);
  }
  return out;
}

void validate(Instrument& instrument) {
  if (instrument.id.empty()) throw InvalidInstrument("instrument without id");
  std::set<std::string> seen;
  instrument.constructs.clear();
  for (const auto& item : instrument.items) {
    if (item.id.empty()) throw InvalidInstrument(instrument.id + ": item without id");
    if (item.construct.empty()) throw InvalidInstrument(item.id + ": no construct");
    if (item.scale_max < 2) throw InvalidInstrument(item.id + ": scale_max below 2");
    if (!seen.insert(item.id).second) throw InvalidInstrument("duplicate item id " + item.id);
    if (std::find(instrument.constructs.begin(), instrument.constructs.end(), item.construct) ==
        instrument.constructs.end()) {
      instrument.constructs.push_back(item.construct);
    }
  }
}

nlohmann::json to_json(const Instrument& instrument) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : instrument.items) {
    items.push_back({{"id", item.id},
                     {"construct", item.construct},
                     {"text", item.text},
                     {"reverse_keyed", item.reverse_keyed},
                     {"scale_max", item.scale_max}});
  }
  return {{"id", instrument.id}, {"title", instrument.title}, {"constructs", instrument.constructs}, {"items", items}};
}

Instrument instrument_from_json(const nlohmann::json& j) {
  try {
    Instrument in;
    in.id = j.at("id").get<std::string>();
    in.title = j.value("title", in.id);
    for (const auto& it : j.at("items")) {
      LikertItem item;
      item.id = it.at("id").get<std::string>();
      item.construct = it.at("construct").get<std::string>();
      item.text = it.value("text", "");
      item.reverse_keyed = it.value("reverse_keyed", false);
      item.scale_max = it.value("scale_max", 5);
      in.items.push_back(std::move(item));
    }
    validate(in);
    return in;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("instrument: ") + e.what());
  }
}

namespace {

void add(Instrument& in, const std::string& id, const std::string& construct, const std::string& text,
         bool reversed = false) {
  in.items.push_back({id, construct, text, reversed, 5});
}

}  // namespace

std::vector<Instrument> default_instruments() {
  Instrument ipip;
  ipip.id = "mini_ipip6";
  ipip.title = "Personality (Mini-IPIP6)";
  // Keying follows the published short form: Honesty-Humility is fully
  // reversed, Openness has three reversed items, the rest two.
  struct Trait {
    const char* key;
    const char* name;
    bool reversed[4];
  };
  const Trait traits[] = {
      {"ext", "Extraversion", {false, false, true, true}},
      {"agr", "Agreeableness", {false, false, true, true}},
      {"con", "Conscientiousness", {false, false, true, true}},
      {"neu", "Neuroticism", {false, false, true, true}},
      {"opn", "Openness", {false, true, true, true}},
      {"hh", "Honesty-Humility", {true, true, true, true}},
  };
  // Presentation interleaves the traits, as the short form does.
  for (int i = 0; i < 4; ++i) {
    for (const auto& t : traits) {
      const std::string id = std::string("ipip_") + t.key + std::to_string(i + 1);
      add(ipip, id, t.name, std::string(t.name) + " statement " + std::to_string(i + 1), t.reversed[i]);
    }
  }
  validate(ipip);

  Instrument post;
  post.id = "post_interaction";
  post.title = "Post-interaction survey";
  for (int i = 1; i <= 3; ++i) add(post, "trust" + std::to_string(i), "Trust", "Trust statement " + std::to_string(i));
  for (int i = 1; i <= 6; ++i) {
    add(post, "rel" + std::to_string(i), "Reliability", "Reliability statement " + std::to_string(i),
        i == 3 || i == 5);
  }
  for (int i = 1; i <= 10; ++i) {
    add(post, "sus" + std::to_string(i), "Usability", "Usability statement " + std::to_string(i), i % 2 == 0);
  }
  validate(post);
  return {ipip, post};
}

nlohmann::json instruments_to_json(std::span<const Instrument> instruments) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& in : instruments) out.push_back(to_json(in));
  return {{"instruments", out}};
}

std::vector<Instrument> instruments_from_json(const nlohmann::json& j) {
  std::vector<Instrument> out;
  try {
    for (const auto& in : j.at("instruments")) out.push_back(instrument_from_json(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("instruments: ") + e.what());
  }
  std::set<std::string> ids;
  for (const auto& in : out) {
    for (const auto& item : in.items) {
      if (!ids.insert(item.id).second) throw InvalidInstrument("item id " + item.id + " used twice");
    }
  }
  return out;
}

const LikertItem* find_item(std::span<const Instrument> instruments, const std::string& item_id) {
  for (const auto& in : instruments) {
    if (const auto* item = in.find(item_id)) return item;
  }
  return nullptr;
}

void validate_answer(std::span<const Instrument> instruments, const std::string& item_id, int value) {
  const LikertItem* item = find_item(instruments, item_id);
  if (!item) throw UnknownItem("unknown item " + item_id);
  if (value < 1 || value > item->scale_max) {
    throw OutOfScale(item_id + ": " + std::to_string(value) + " outside 1.." + std::to_string(item->scale_max));
  }
}

nlohmann::json to_json(const Demographics& d) {
  return {{"age_band", d.age_band}, {"gender", d.gender}, {"education", d.education}, {"experience", d.experience}};
}

Demographics demographics_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("demographics must be an object");
  Demographics d;
  try {
    d.age_band = j.value("age_band", "");
    d.gender = j.value("gender", "");
    d.education = j.value("education", "");
    d.experience = j.value("experience", "");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("demographics: ") + e.what());
  }
  return d;
}

}  // namespace xids::survey
