// Command-line front end: train, eval, synth, augment, gradcheck, report.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "rsflow/augment.hpp"
#include "rsflow/config.hpp"
#include "rsflow/ltnt.hpp"
#include "rsflow/runner.hpp"
#include "rsflow/sampler.hpp"
#include "rsflow/toyspeech.hpp"

namespace {

using namespace rsflow;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitFormat = 4;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case Error::Kind::Config: return kExitConfig;
        case Error::Kind::Divergence: return kExitDivergence;
        case Error::Kind::Format:
        case Error::Kind::Io: return kExitFormat;
        default: return kExitFailure;
    }
}

/// Accepts comma/space separated ids ("0,3,7") or token names ("a d h").
Tokens parse_token_string(const std::string& text, int vocab_size) {
    std::string spaced = text;
    for (char& c : spaced)
        if (c == ',') c = ' ';
    std::istringstream in(spaced);
    Tokens out;
    std::string word;
    while (in >> word) {
        int id = -1;
        if (std::all_of(word.begin(), word.end(), [](unsigned char c) { return std::isdigit(c); })) {
            id = std::stoi(word);
        } else {
            for (int k = 0; k < vocab_size; ++k)
                if (token_name(k) == word) id = k;
        }
        if (id < 0 || id >= vocab_size) throw ConditionError("unknown token '" + word + "'");
        out.push_back(id);
    }
    if (out.empty()) throw ConditionError("--text holds no tokens");
    return out;
}

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    int threads = 1;
};

int cmd_train(const Globals& g) {
    if (g.config.empty()) throw ConfigError("train: --config is required");
    RunConfig cfg = parse_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
    TrainOptions opts;
    opts.threads = g.threads;
    opts.log = &std::clog;
    const auto result = run_train(cfg, opts);
    std::cout << "final checkpoint: " << result.final_checkpoint.string() << "\n"
              << "metrics: " << result.metrics_csv.string() << "\n";
    return kExitOk;
}

int cmd_synth(const Globals& g, const std::string& checkpoint, const std::string& codebook_path,
              const std::string& text, int nfe, double cfg_weight, int frames_per_token, double frame_rate,
              const std::string& out) {
    const Checkpoint ckpt = read_checkpoint(checkpoint);
    std::optional<Codebook> cb;
    if (!codebook_path.empty()) {
        cb = read_codebook(codebook_path);
        frames_per_token = cb->frames_per_token;
        frame_rate = cb->frame_rate;
    }
    const Tokens tokens = parse_token_string(text, ckpt.params.config.vocab_size);
    const SamplerConfig sc{nfe, cfg_weight, g.seed.value_or(0)};
    // Same noise as utterance 0 of an evaluation with this seed.
    SeededRng rng = SeededRng(sc.seed).substream(std::uint64_t{0});
    const auto frames = static_cast<Eigen::Index>(tokens.size()) * frames_per_token;
    const LatentSequence x =
        euler_solve<float>(model_field(ckpt.params), ckpt.params.config.channels, frames, frame_rate, &tokens, sc, rng);
    write_ltnt(out, x);
    std::cout << "wrote " << out << " (" << x.channels() << "x" << x.frames() << ")\n";
    if (cb) std::cout << "decoded: " << render_text(oracle_decode(x, *cb)) << "\n";
    return kExitOk;
}

int cmd_augment(const Globals& g, const std::string& in, const std::string& out, const std::string& report_path,
                const std::string& mode, std::optional<double> budget, const std::string& codebook_path) {
    const LatentSequence x = read_ltnt(in);
    LatentSequence silence = LatentSequence::zeros(x.channels(), x.frames(), x.frame_rate());
    if (!codebook_path.empty()) silence = silence_latent(read_codebook(codebook_path), x.frames());
    AugmentConfig cfg;
    cfg.frame_rate = x.frame_rate();
    AugmentOverrides ov;
    if (mode == "repeat") ov.mode = AugmentMode::Repeat;
    else if (mode == "skip") ov.mode = AugmentMode::Skip;
    else if (mode != "auto") throw ConfigError("--mode must be auto, repeat or skip");
    ov.budget = budget;

    SeededRng rng(g.seed.value_or(0));
    const auto outcome = augment(x, silence, rng, cfg, ov);
    write_ltnt(out, outcome.latent);

    std::ostringstream rep;
    rep << "mode " << to_string(outcome.mode) << "\n"
        << "budget " << outcome.budget << "\n";
    for (const auto& e : outcome.edits) rep << "edit " << describe(e) << "\n";
    rep << "realized_coverage " << outcome.realized_coverage << "\n";
    if (report_path.empty()) {
        std::cout << rep.str();
    } else {
        std::ofstream f(report_path);
        if (!f) throw IoError("cannot write " + report_path);
        f << rep.str();
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rsflow: contrastive flow matching with repeat/skip latent negatives"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Random seed (overrides the config)");
    app.add_option("--config", g.config, "Run configuration file (key = value)");
    app.add_option("--out-dir", g.out_dir, "Output directory");
    app.add_option("--threads", g.threads, "Worker threads for evaluation")->check(CLI::PositiveNumber);

    auto* train = app.add_subcommand("train", "Train one variant and write checkpoints and metrics");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint at several NFE values and seeds");
    EvalRequest req;
    std::string ckpt_path, codebook_path, dataset_path;
    eval->add_option("--checkpoint", ckpt_path)->required();
    eval->add_option("--codebook", codebook_path)->required();
    eval->add_option("--dataset", dataset_path, "Evaluation set file (ids<TAB>LTNT-hex)")->required();
    eval->add_option("--nfe", req.nfe)->delimiter(',');
    eval->add_option("--seeds", req.seeds)->delimiter(',');
    eval->add_option("--cfg-weight", req.cfg_weight);
    eval->add_option("--variant", req.variant, "Label for the variant column");

    auto* synth = app.add_subcommand("synth", "Synthesize one latent from text");
    std::string synth_ckpt, synth_cb, text, synth_out;
    int nfe = 24, frames_per_token = 4;
    double cfg_weight = 3.0, frame_rate = 20.0;
    synth->add_option("--checkpoint", synth_ckpt)->required();
    synth->add_option("--text", text, "Token names (\"a b c\") or ids (\"0,1,2\")")->required();
    synth->add_option("--nfe", nfe)->check(CLI::PositiveNumber);
    synth->add_option("--cfg-weight", cfg_weight);
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--codebook", synth_cb, "Codebook; sets frames per token and prints the oracle decode");
    synth->add_option("--frames-per-token", frames_per_token)->check(CLI::PositiveNumber);
    synth->add_option("--frame-rate", frame_rate);
    synth->add_option("--seed", seed_value, "Random seed");

    auto* aug = app.add_subcommand("augment", "Apply a repeat/skip corruption to an LTNT latent");
    std::string aug_in, aug_out, aug_report, aug_mode = "auto", aug_cb;
    std::optional<double> aug_budget;
    aug->add_option("--in", aug_in)->required();
    aug->add_option("--out", aug_out)->required();
    aug->add_option("--report", aug_report, "Report file (default: stdout)");
    aug->add_option("--mode", aug_mode)->check(CLI::IsMember({"auto", "repeat", "skip"}));
    aug->add_option("--budget", aug_budget, "Override the sampled coverage budget");
    aug->add_option("--codebook", aug_cb, "Codebook providing the silence latent (default: zeros)");
    aug->add_option("--seed", seed_value, "Random seed");

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the training objective gradients");
    std::string flip;
    grad->add_option("--flip-sign", flip, "Fault injection: negate one tensor's analytic gradient");
    grad->add_option("--seed", seed_value, "Random seed");

    auto* report = app.add_subcommand("report", "Merge metrics CSVs into a per-variant CER curve table");
    std::vector<std::string> report_inputs;
    std::string report_out;
    report->add_option("inputs", report_inputs, "metrics.csv files")->required();
    report->add_option("--out", report_out, "Output CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (*seed_opt || (synth->count("--seed") + aug->count("--seed") + grad->count("--seed")) > 0) g.seed = seed_value;

    try {
        if (*train) return cmd_train(g);
        if (*eval) {
            req.checkpoint = ckpt_path;
            req.codebook = codebook_path;
            req.dataset = dataset_path;
            req.output_dir = g.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(g.out_dir);
            req.threads = g.threads;
            const auto files = run_eval(req);
            std::cout << "wrote " << files.metrics_csv.string() << ", " << files.summary_csv.string() << ", "
                      << files.utterances_csv.string() << "\n";
            return kExitOk;
        }
        if (*synth) return cmd_synth(g, synth_ckpt, synth_cb, text, nfe, cfg_weight, frames_per_token, frame_rate, synth_out);
        if (*aug) return cmd_augment(g, aug_in, aug_out, aug_report, aug_mode, aug_budget, aug_cb);
        if (*grad) {
            GradcheckOptions opts;
            if (!flip.empty()) opts.flip_sign_of = flip;
            const auto r = run_gradcheck(tiny_model_config(), g.seed.value_or(0), opts);
            std::cout << "parameters " << r.parameter_count << "\n";
            for (const auto& p : r.probes)
                std::cout << "probe lambda=(" << p.weights.lambda_rand << "," << p.weights.lambda_aug << ") " << p.tensor
                          << "[" << p.index << "] analytic=" << p.analytic << " numeric=" << p.numeric
                          << " rel_error=" << p.rel_error << "\n";
            std::cout << (r.pass ? "PASS" : "FAIL") << " max_rel_error=" << r.max_rel_error
                      << " worst_tensor=" << r.worst_tensor << "\n";
            return r.pass ? kExitOk : kExitFailure;
        }
        if (*report) {
            std::vector<std::filesystem::path> paths(report_inputs.begin(), report_inputs.end());
            const std::string table = merge_report(paths);
            if (report_out.empty()) {
                std::cout << table;
            } else {
                std::ofstream f(report_out);
                if (!f) throw IoError("cannot write " + report_out);
                f << table;
            }
            return kExitOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}
