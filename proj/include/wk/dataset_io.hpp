#pragma once

#include <map>
#include <string>
#include <vector>

#include "wk/core.hpp"

namespace wk {

struct Episode;
struct SidecarEntry;
struct Manifest;
struct WorldSpec;
struct GeneratedData;

// Writes content to path atomically (temp file + rename).
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// One JSON object per line:
//   {"episode_id":..,"step_index":..,"scenario":..,"action_text":..,
//    "modalities":{"image":[..],..},"next_modalities":{..}}
// Floats carry 17 significant digits. Returns the fnv hash of the bytes.
uint64_t write_dataset_jsonl(const std::string& path, const std::vector<Episode>& episodes);

// Action embeddings are not stored; they are recomputed from action_text by
// the provided encoder so the dynamics stay out of reach of consumers.
std::vector<Episode> read_dataset_jsonl(const std::string& path, const WorldSpec& encoder_spec);

void write_sidecar_jsonl(const std::string& path,
                         const std::map<std::pair<int64_t, int>, SidecarEntry>& sidecar);
std::map<std::pair<int64_t, int>, SidecarEntry> read_sidecar_jsonl(const std::string& path);

void write_manifest_json(const std::string& path, const Manifest& man);
Manifest read_manifest_json(const std::string& path);

void write_world_json(const std::string& path, const WorldSpec& spec);
WorldSpec read_world_json(const std::string& path);

std::string vec_json(const Vec& v);  // 17 sig digit array

}  // namespace wk
