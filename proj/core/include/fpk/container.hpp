#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpk/ensemble.hpp"
#include "fpk/measures.hpp"
#include "fpk/test_functions.hpp"

namespace fpk::io {

/// Chunked binary container: "FPKC", u32 version, u64 header length, a JSON
/// header, then little-endian doubles. The header lists one chunk per time
/// node as {offset, count} in bytes/doubles relative to the data section.
inline constexpr std::uint32_t kContainerVersion = 1;

void write_flow(const std::filesystem::path& path, const MarginalFlow& flow);
MarginalFlow read_flow(const std::filesystem::path& path);

void write_ensemble(const std::filesystem::path& path, const PathEnsemble& ens);
PathEnsemble read_ensemble(const std::filesystem::path& path);

/// Header of any container, without reading the payload.
nlohmann::json read_header(const std::filesystem::path& path);

/// Pretty JSON with a trailing newline; parent directories are created.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json(const std::filesystem::path& path);

/// t followed by one column of integrals per family member.
std::string family_integrals_csv(const MarginalFlow& flow, const TestFamily& family);
std::string martingale_csv(const std::vector<MartingaleStat>& stats);

}  // namespace fpk::io
