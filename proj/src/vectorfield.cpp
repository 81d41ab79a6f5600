#include "rsflow/vectorfield.hpp"

namespace rsflow {

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string("model.") + name + ": must be >= 1, got " + std::to_string(v));
    };
    positive(channels, "channels");
    positive(vocab_size, "vocab_size");
    positive(embed_dim, "embed_dim");
    positive(hidden_dim, "hidden_dim");
    positive(num_layers, "num_layers");
    positive(context_window, "context_window");
    positive(time_embed_dim, "time_embed_dim");
    if (context_window % 2 == 0)
        throw ConfigError("model.context_window: must be odd, got " + std::to_string(context_window));
    if (!(uncond_prob >= 0.0 && uncond_prob < 1.0))
        throw ConfigError("model.uncond_prob: must lie in [0, 1), got " + std::to_string(uncond_prob));
}

std::size_t ModelConfig::parameter_count() const {
    auto n = static_cast<std::size_t>(embed_dim) * static_cast<std::size_t>(vocab_size + 1);
    for (int l = 0; l < num_layers; ++l)
        n += static_cast<std::size_t>(layer_out(l)) * static_cast<std::size_t>(layer_in(l) + 1);
    return n;
}

}  // namespace rsflow
