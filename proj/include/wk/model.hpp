#pragma once

#include <array>
#include <map>
#include <string>

#include "wk/backbone.hpp"
#include "wk/decoder.hpp"
#include "wk/reflector.hpp"

namespace wk {

// The full trainable bundle: backbone (+adapters), one signal head per
// (modality, target space), the reflector, and the fixed context lift and
// render transforms that are part of the checkpoint identity.
struct WorldModel {
    ModelConfig cfg;
    ReflectorConfig rcfg;
    Backbone backbone;
    std::vector<SignalHead> heads;  // 3 modalities x 2 spaces
    Reflector reflector;
    ContextLift lift;
    std::map<Modality, std::pair<Mat, Vec>> render_maps;  // R (d_enc x d_enc), r

    static WorldModel init(const ModelConfig& cfg, const ReflectorConfig& rcfg);

    SignalHead& head(Modality m, Space s);
    void for_each_tensor(const std::function<void(Tensor&)>& fn);
    void for_each_tensor(const std::function<void(const Tensor&)>& fn) const;

    // Components: base | adapters | heads | heads_unified | heads_render |
    // reflector | all. Frozen tensors get zero gradient and stay
    // bit-identical across optimizer steps.
    void set_freeze(const std::string& component, bool frozen);

    uint64_t component_checksum(const std::string& component) const;
    std::map<std::string, uint64_t> all_checksums() const;

    // Render-space target: a fixed affine image of the unified-space target.
    Vec render_target(Modality m, const Vec& unified) const;
};

void save_checkpoint(const WorldModel& model, const std::string& path,
                     const std::array<uint64_t, 4>* rng_state = nullptr);
WorldModel load_checkpoint(const std::string& path,
                           std::array<uint64_t, 4>* rng_state = nullptr);

// Inference-mode prediction for every requested modality of the stream.
std::map<Modality, Vec> model_predict(WorldModel& model, const TokenStream& stream,
                                      Space space = Space::unified);

}  // namespace wk
