#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace xids::data {

// Generates NSL-KDD formatted text (43 fields per line) with class-dependent
// feature patterns: SYN-flood style DoS, scan-style Probe, login-oriented R2L
// and root-shell U2R sessions next to ordinary traffic. Class shares roughly
// follow the public training file; every class gets at least two rows when
// `rows` >= 10. Output depends only on (rows, seed).
std::string synthetic_nslkdd(std::size_t rows, std::uint64_t seed);

void write_synthetic_nslkdd(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed);

}  // namespace xids::data
