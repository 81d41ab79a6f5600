#include "rsflow/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace rsflow {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::Baseline: return "baseline";
        case Variant::Contrastive: return "contrastive";
        case Variant::Robust: return "robust";
    }
    return "?";
}

Variant parse_variant(std::string_view s) {
    if (s == "baseline") return Variant::Baseline;
    if (s == "contrastive") return Variant::Contrastive;
    if (s == "robust") return Variant::Robust;
    throw ConfigError("variant: expected baseline, contrastive or robust, got '" + std::string(s) + "'");
}

LossWeights weights_for(Variant v) {
    switch (v) {
        case Variant::Baseline: return LossWeights::baseline();
        case Variant::Contrastive: return LossWeights::contrastive();
        case Variant::Robust: return LossWeights::robust();
    }
    return LossWeights::robust();
}

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc() || res.ptr != last) {
        const char* kind = std::is_floating_point_v<T> ? "a real number" : "an integer";
        throw ConfigError(key + ": expected " + kind + ", got '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
    std::vector<T> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
    if (out.empty()) throw ConfigError(key + ": expected a comma-separated list, got '" + value + "'");
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

struct Entry {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Entry integer(std::string key, T RunConfig::*member) {
    return {key, [key, member](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
            [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

template <typename Section, typename T>
Entry nested(std::string key, Section RunConfig::*section, T Section::*member) {
    return {key,
            [key, section, member](RunConfig& c, const std::string& v) { (c.*section).*member = parse_number<T>(key, v); },
            [section, member](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>)
                    return format_double((c.*section).*member);
                else
                    return std::to_string((c.*section).*member);
            }};
}

Entry interval(std::string key, Interval AugmentConfig::*member, bool lower) {
    return {key,
            [key, member, lower](RunConfig& c, const std::string& v) {
                auto& iv = c.augment.*member;
                (lower ? iv.lo : iv.hi) = parse_number<double>(key, v);
            },
            [member, lower](const RunConfig& c) {
                const auto& iv = c.augment.*member;
                return format_double(lower ? iv.lo : iv.hi);
            }};
}

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = [] {
        std::vector<Entry> e;
        e.push_back({"variant", [](RunConfig& c, const std::string& v) { c.variant = parse_variant(v); },
                     [](const RunConfig& c) { return std::string(to_string(c.variant)); }});
        e.push_back({"lambda_rand",
                     [](RunConfig& c, const std::string& v) { c.weights.lambda_rand = parse_number<double>("lambda_rand", v); },
                     [](const RunConfig& c) { return format_double(c.weights.lambda_rand); }});
        e.push_back({"lambda_aug",
                     [](RunConfig& c, const std::string& v) { c.weights.lambda_aug = parse_number<double>("lambda_aug", v); },
                     [](const RunConfig& c) { return format_double(c.weights.lambda_aug); }});
        e.push_back(integer("seed", &RunConfig::seed));
        e.push_back(integer("total_steps", &RunConfig::total_steps));
        e.push_back(integer("eval_every", &RunConfig::eval_every));
        e.push_back(integer("log_every", &RunConfig::log_every));
        e.push_back(integer("checkpoint_every", &RunConfig::checkpoint_every));
        e.push_back(integer("batch_size", &RunConfig::batch_size));
        e.push_back({"output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
                     [](const RunConfig& c) { return c.output_dir.string(); }});
        e.push_back({"write_train_set",
                     [](RunConfig& c, const std::string& v) { c.write_train_set = parse_bool("write_train_set", v); },
                     [](const RunConfig& c) { return std::string(c.write_train_set ? "true" : "false"); }});

        e.push_back(nested("optimizer.lr", &RunConfig::optimizer, &AdamConfig::lr));
        e.push_back(nested("optimizer.beta1", &RunConfig::optimizer, &AdamConfig::beta1));
        e.push_back(nested("optimizer.beta2", &RunConfig::optimizer, &AdamConfig::beta2));
        e.push_back(nested("optimizer.eps", &RunConfig::optimizer, &AdamConfig::eps));
        e.push_back(nested("optimizer.halve_lr_every", &RunConfig::optimizer, &AdamConfig::halve_every));

        e.push_back(nested("model.embed_dim", &RunConfig::model, &ModelConfig::embed_dim));
        e.push_back(nested("model.hidden_dim", &RunConfig::model, &ModelConfig::hidden_dim));
        e.push_back(nested("model.num_layers", &RunConfig::model, &ModelConfig::num_layers));
        e.push_back(nested("model.context_window", &RunConfig::model, &ModelConfig::context_window));
        e.push_back(nested("model.time_embed_dim", &RunConfig::model, &ModelConfig::time_embed_dim));
        e.push_back(nested("model.uncond_prob", &RunConfig::model, &ModelConfig::uncond_prob));

        e.push_back(nested("augment.p_repeat", &RunConfig::augment, &AugmentConfig::p_repeat));
        e.push_back(interval("augment.repeat_budget_min", &AugmentConfig::repeat_budget, true));
        e.push_back(interval("augment.repeat_budget_max", &AugmentConfig::repeat_budget, false));
        e.push_back(interval("augment.skip_budget_min", &AugmentConfig::skip_budget, true));
        e.push_back(interval("augment.skip_budget_max", &AugmentConfig::skip_budget, false));
        e.push_back(interval("augment.span_min_seconds", &AugmentConfig::span_seconds, true));
        e.push_back(interval("augment.span_max_seconds", &AugmentConfig::span_seconds, false));

        e.push_back(nested("data.vocab_size", &RunConfig::data, &DatasetConfig::vocab_size));
        e.push_back(nested("data.channels", &RunConfig::data, &DatasetConfig::channels));
        e.push_back(nested("data.frames_per_token", &RunConfig::data, &DatasetConfig::frames_per_token));
        e.push_back(nested("data.frame_rate", &RunConfig::data, &DatasetConfig::frame_rate));
        e.push_back(nested("data.seq_len", &RunConfig::data, &DatasetConfig::seq_len));
        e.push_back(nested("data.train_size", &RunConfig::data, &DatasetConfig::train_size));
        e.push_back(nested("data.eval_size", &RunConfig::data, &DatasetConfig::eval_size));
        e.push_back(nested("data.noise_sigma", &RunConfig::data, &DatasetConfig::noise_sigma));
        e.push_back(nested("data.min_dist", &RunConfig::data, &DatasetConfig::min_dist));

        e.push_back({"eval.nfe", [](RunConfig& c, const std::string& v) { c.eval.nfe = parse_list<int>("eval.nfe", v); },
                     [](const RunConfig& c) { return join(c.eval.nfe); }});
        e.push_back({"eval.seeds",
                     [](RunConfig& c, const std::string& v) { c.eval.seeds = parse_list<std::uint64_t>("eval.seeds", v); },
                     [](const RunConfig& c) { return join(c.eval.seeds); }});
        e.push_back(nested("eval.cfg_weight", &RunConfig::eval, &EvalConfig::cfg_weight));
        return e;
    }();
    return entries;
}

}  // namespace

void RunConfig::sync_derived() {
    model.channels = data.channels;
    model.vocab_size = data.vocab_size;
    augment.frame_rate = data.frame_rate;
}

void RunConfig::validate() const {
    model.validate();
    augment.validate();
    data.validate();
    if (model.channels != data.channels || model.vocab_size != data.vocab_size)
        throw ConfigError("model: channels/vocab_size must match the data section");
    if (!std::isfinite(weights.lambda_rand) || weights.lambda_rand < 0.0)
        throw ConfigError("lambda_rand: must be a finite non-negative number");
    if (!std::isfinite(weights.lambda_aug) || weights.lambda_aug < 0.0)
        throw ConfigError("lambda_aug: must be a finite non-negative number");
    if (batch_size < 2) throw ConfigError("batch_size: must be >= 2 (random negatives roll the batch)");
    if (data.train_size < 1 && total_steps > 0) throw ConfigError("data.train_size: training needs at least one utterance");
    if (!(optimizer.lr > 0.0)) throw ConfigError("optimizer.lr: must be positive");
    if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) throw ConfigError("optimizer.beta1: must lie in [0, 1)");
    if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) throw ConfigError("optimizer.beta2: must lie in [0, 1)");
    if (!(optimizer.eps > 0.0)) throw ConfigError("optimizer.eps: must be positive");
    for (int n : eval.nfe)
        if (n < 1) throw ConfigError("eval.nfe: every entry must be >= 1");
    if (!std::isfinite(eval.cfg_weight)) throw ConfigError("eval.cfg_weight: must be finite");
}

RunConfig parse_config_text(std::string_view text, const std::string& source) {
    RunConfig cfg;
    std::vector<std::pair<std::string, std::string>> assignments;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        const std::string where = source + ":" + std::to_string(lineno);
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + body + "'");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        const auto& reg = registry();
        if (std::none_of(reg.begin(), reg.end(), [&](const Entry& e) { return e.key == key; }))
            throw ConfigError(where + ": unknown key '" + key + "'");
        if (!cfg.explicit_keys.insert(key).second) throw ConfigError(where + ": key '" + key + "' set twice");
        assignments.emplace_back(key, value);
    }
    if (!cfg.explicit_keys.contains("variant")) throw ConfigError(source + ": missing required key 'variant'");

    // The variant fixes the default weights, so it is applied first.
    for (const auto& [key, value] : assignments)
        if (key == "variant") cfg.variant = parse_variant(value);
    cfg.weights = weights_for(cfg.variant);
    for (const auto& [key, value] : assignments) {
        for (const auto& e : registry())
            if (e.key == key) e.set(cfg, value);
    }
    cfg.sync_derived();
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.string());
}

std::string echo_config(const RunConfig& cfg) {
    RunConfig defaults;
    defaults.variant = cfg.variant;
    defaults.weights = weights_for(cfg.variant);
    std::ostringstream os;
    os << "# resolved configuration\n";
    for (const auto& e : registry()) {
        const std::string value = e.get(cfg);
        os << e.key << " = " << value;
        if (e.key != "variant" && value != e.get(defaults)) os << "  # override";
        os << "\n";
    }
    return os.str();
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& e : registry()) keys.push_back(e.key);
    return keys;
}

}  // namespace rsflow
