#include "rsflow/runner.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "rsflow/binary_io.hpp"
#include "rsflow/flowmatch.hpp"

namespace rsflow {

namespace {

// Upper bound on utterances per batched Euler solve, to cap activation memory.
constexpr std::size_t kSynthChunk = 256;

std::string fixed(double v, int digits = 6) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string csv_row(std::uint64_t step, const std::string& variant, int nfe, const std::string& seed_field,
                    const ErrorRateReport& c, const ErrorRateReport& w) {
    std::ostringstream os;
    os << step << ',' << variant << ',' << nfe << ',' << seed_field << ',' << fixed(c.rate_pct) << ','
       << fixed(w.rate_pct) << ',' << c.substitutions << ',' << c.insertions << ',' << c.deletions << ',' << c.ref_len
       << '\n';
    return os.str();
}

/// Appends whole rows and flushes, so an interrupted run leaves a valid prefix.
class CsvAppender {
public:
    CsvAppender(const std::filesystem::path& path, const char* header) : out_(path, std::ios::trunc) {
        if (!out_) throw IoError("cannot write " + path.string());
        append(std::string(header) + "\n");
    }
    void append(const std::string& rows) {
        out_ << rows;
        out_.flush();
        if (!out_) throw IoError("write failed");
    }

private:
    std::ofstream out_;
};

std::string quote(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

Synthesizer make_synthesizer(const VectorFieldParams<float>& params, Eigen::Index frames, double frame_rate, int nfe,
                             double cfg_weight, int threads) {
    const SamplerConfig sc{nfe, cfg_weight, 0};
    sc.validate();
    return [&params, frames, frame_rate, sc, threads](const std::vector<Tokens>& texts, std::uint64_t seed) {
        std::vector<LatentSequence> out(texts.size());
        const SeededRng base(seed);
        const auto field = model_batch_field(params);
        auto run_range = [&](std::size_t begin, std::size_t end) {
            for (std::size_t lo = begin; lo < end; lo += kSynthChunk) {
                const std::size_t hi = std::min(end, lo + kSynthChunk);
                std::vector<Eigen::Index> lengths(hi - lo, frames);
                std::vector<const Tokens*> conds;
                std::vector<SeededRng> rngs;
                for (std::size_t k = lo; k < hi; ++k) {
                    conds.push_back(&texts[k]);
                    rngs.push_back(base.substream(static_cast<std::uint64_t>(k)));
                }
                auto xs = euler_solve_batch<float>(field, params.config.channels, lengths, frame_rate, conds, sc, rngs);
                for (std::size_t k = lo; k < hi; ++k) out[k] = std::move(xs[k - lo]);
            }
        };
        const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, texts.size()));
        if (workers == 1) {
            run_range(0, texts.size());
        } else {
            std::vector<std::thread> pool;
            const std::size_t per = (texts.size() + workers - 1) / workers;
            for (std::size_t w = 0; w < workers; ++w) {
                const std::size_t b = w * per, e = std::min(texts.size(), b + per);
                if (b < e) pool.emplace_back(run_range, b, e);
            }
            for (auto& t : pool) t.join();
        }
        return out;
    };
}

std::string metrics_rows(std::uint64_t step, const std::string& variant, int nfe, const EvalReport& report) {
    std::string out;
    for (const auto& s : report.per_seed) out += csv_row(step, variant, nfe, std::to_string(s.seed), s.cer, s.wer);
    return out;
}

std::string summary_row(std::uint64_t step, const std::string& variant, int nfe, const EvalReport& report) {
    return csv_row(step, variant, nfe, std::to_string(report.per_seed.size()), report.cer, report.wer);
}

TrainSetup prepare_training(const RunConfig& cfg) {
    const SeededRng root(cfg.seed);
    const auto& d = cfg.data;
    TrainSetup setup;
    setup.codebook = make_codebook(root.substream("codebook"), d.vocab_size, d.channels, d.frames_per_token, d.min_dist,
                                   d.frame_rate);
    setup.dataset = gen_dataset(d, setup.codebook, root.substream("dataset"));
    setup.params = VectorFieldParams<float>::init(cfg.model, root.substream("init"));
    setup.silence = silence_latent(setup.codebook, d.frames());
    return setup;
}

SeededRng training_step_rng(std::uint64_t seed, std::uint64_t step) {
    return SeededRng(seed).substream("train").substream(step);
}

std::vector<std::size_t> sample_batch_indices(const SeededRng& step_rng, std::size_t dataset_size, int batch_size) {
    SeededRng rng = step_rng.substream("batch");
    std::vector<std::size_t> idx(static_cast<std::size_t>(batch_size));
    for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_int(0, dataset_size - 1));
    return idx;
}

TrainResult run_train(const RunConfig& cfg, const TrainOptions& opts) {
    cfg.validate();
    std::ostream& log = opts.log ? *opts.log : std::clog;
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    const fs::path dir = cfg.output_dir;

    {
        const std::string echo = echo_config(cfg);
        write_file_atomic(dir / "resolved_config.txt", std::span<const char>(echo.data(), echo.size()));
    }

    TrainSetup setup = prepare_training(cfg);
    write_codebook(dir / "codebook.cbok", setup.codebook);
    write_dataset_file(dir / "eval_set.tsv", setup.dataset.eval);
    if (cfg.write_train_set) write_dataset_file(dir / "train_set.tsv", setup.dataset.train);

    TrainResult result;
    result.metrics_csv = dir / "metrics.csv";
    result.summary_csv = dir / "summary.csv";
    result.losses_csv = dir / "losses.csv";
    result.final_checkpoint = dir / "checkpoint_final.rsfl";
    CsvAppender metrics(result.metrics_csv, kMetricsHeader);
    CsvAppender summary(result.summary_csv, kSummaryHeader);
    CsvAppender losses(result.losses_csv, kLossHeader);

    Checkpoint ckpt{setup.params, AdamState<float>::for_params(setup.params), 0};
    const std::string variant = to_string(cfg.variant);
    const Eigen::Index frames = cfg.data.frames();

    std::vector<TrainExample<float>> batch(static_cast<std::size_t>(cfg.batch_size));
    for (std::uint64_t step = 1; step <= cfg.total_steps; ++step) {
        const SeededRng step_rng = training_step_rng(cfg.seed, step);
        const auto indices = sample_batch_indices(step_rng, setup.dataset.train.size(), cfg.batch_size);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto& u = setup.dataset.train[indices[i]];
            batch[i] = {u.latent, u.tokens};
        }
        auto step_result = training_step<float>(batch, ckpt.params, setup.silence, cfg.weights, cfg.augment,
                                                step_rng.substream("items"));
        const auto& l = step_result.losses;
        auto diverged = [&](const std::string& what) {
            const std::string msg = "step " + std::to_string(step) + ": " + what + "\n";
            write_file_atomic(dir / "divergence.txt", std::span<const char>(msg.data(), msg.size()));
            throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + what);
        };
        if (!std::isfinite(l.total) || !std::isfinite(l.pos)) diverged("non-finite loss");
        if (step_result.divergence_warning && result.divergence_warnings++ == 0)
            log << "warning: step " << step << ": negative loss term exceeds 10x the positive term (pos=" << l.pos
                << " rand=" << l.rand << " aug=" << l.aug << ")\n";

        adam_step(ckpt.params, step_result.grads, ckpt.adam, cfg.optimizer.lr_at(step - 1), cfg.optimizer);
        ckpt.step = step;
        if (!ckpt.params.all_finite()) diverged("non-finite parameters after update");
        result.last_losses = l;

        if (cfg.log_every > 0 && step % cfg.log_every == 0) {
            std::ostringstream row;
            row << step << ',' << std::setprecision(9) << l.pos << ',' << l.rand << ',' << l.aug << ',' << l.total
                << '\n';
            losses.append(row.str());
        }
        if (cfg.eval_every > 0 && step % cfg.eval_every == 0 && !setup.dataset.eval.empty()) {
            for (int nfe : cfg.eval.nfe) {
                const auto synth = make_synthesizer(ckpt.params, frames, cfg.data.frame_rate, nfe, cfg.eval.cfg_weight,
                                                    opts.threads);
                const auto report = evaluate(synth, setup.dataset.eval, setup.codebook, cfg.eval.seeds);
                metrics.append(metrics_rows(step, variant, nfe, report));
                summary.append(summary_row(step, variant, nfe, report));
                log << variant << " seed " << cfg.seed << " step " << step << " nfe " << nfe << " cer "
                    << fixed(report.cer.rate_pct, 3) << "% wer " << fixed(report.wer.rate_pct, 3) << "% (pos "
                    << fixed(l.pos, 4) << ")\n";
            }
        }
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != cfg.total_steps) {
            std::ostringstream name;
            name << "checkpoint_" << std::setw(7) << std::setfill('0') << step << ".rsfl";
            write_checkpoint(dir / name.str(), ckpt);
        }
    }
    write_checkpoint(result.final_checkpoint, ckpt);
    result.steps = ckpt.step;
    return result;
}

EvalFiles run_eval(const EvalRequest& req) {
    // Read and verify everything before any output exists.
    const Checkpoint ckpt = read_checkpoint(req.checkpoint);
    const Codebook codebook = read_codebook(req.codebook);
    const auto eval_set = read_dataset_file(req.dataset);
    if (eval_set.empty()) throw FormatError(req.dataset.string() + ": no utterances");
    if (codebook.channels != ckpt.params.config.channels || codebook.vocab_size != ckpt.params.config.vocab_size)
        throw FormatError("checkpoint and codebook disagree on channels or vocabulary size");
    const Eigen::Index frames = eval_set.front().latent.frames();
    for (const auto& u : eval_set)
        if (u.latent.frames() != frames) throw FormatError("evaluation set mixes sequence lengths");
    for (int n : req.nfe)
        if (n < 1) throw ConfigError("nfe entries must be >= 1");

    std::ostringstream metrics, summary, utterances;
    metrics << kMetricsHeader << '\n';
    summary << kSummaryHeader << '\n';
    utterances << "step,variant,nfe,seed,index,cer_pct,wer_pct,reference,hypothesis\n";
    for (int nfe : req.nfe) {
        const auto synth = make_synthesizer(ckpt.params, frames, codebook.frame_rate, nfe, req.cfg_weight, req.threads);
        const auto report = evaluate(synth, eval_set, codebook, req.seeds);
        metrics << metrics_rows(ckpt.step, req.variant, nfe, report);
        summary << summary_row(ckpt.step, req.variant, nfe, report);
        for (const auto& r : report.rows)
            utterances << ckpt.step << ',' << req.variant << ',' << nfe << ',' << r.seed << ',' << r.index << ','
                       << fixed(r.cer.rate_pct) << ',' << fixed(r.wer.rate_pct) << ',' << quote(r.reference) << ','
                       << quote(r.hypothesis) << '\n';
    }

    std::filesystem::create_directories(req.output_dir);
    EvalFiles files{req.output_dir / "eval_metrics.csv", req.output_dir / "eval_summary.csv",
                    req.output_dir / "eval_utterances.csv"};
    auto put = [](const std::filesystem::path& p, const std::string& s) {
        write_file_atomic(p, std::span<const char>(s.data(), s.size()));
    };
    put(files.metrics_csv, metrics.str());
    put(files.summary_csv, summary.str());
    put(files.utterances_csv, utterances.str());
    return files;
}

ModelConfig tiny_model_config() {
    ModelConfig m;
    m.channels = 2;
    m.vocab_size = 3;
    m.embed_dim = 2;
    m.hidden_dim = 8;
    m.num_layers = 3;
    m.context_window = 3;
    m.time_embed_dim = 2;
    m.uncond_prob = 0.25;
    return m;
}

GradcheckReport run_gradcheck(const ModelConfig& model, std::uint64_t seed, const GradcheckOptions& opts) {
    model.validate();
    GradcheckReport report;
    report.parameter_count = model.parameter_count();
    if (report.parameter_count > kGradcheckMaxParams)
        throw ConfigError("gradcheck: model has " + std::to_string(report.parameter_count) +
                          " parameters; finite differences are limited to " + std::to_string(kGradcheckMaxParams));

    const SeededRng root(seed);
    constexpr int kFramesPerToken = 2;
    constexpr int kTokens = 4;
    constexpr std::size_t kBatch = 4;
    const Codebook cb = make_codebook(root.substream("codebook"), std::max(model.vocab_size, 2), model.channels,
                                      kFramesPerToken, 0.0, 20.0);
    std::vector<TrainExample<double>> batch;
    SeededRng data_rng = root.substream("data");
    for (std::size_t i = 0; i < kBatch; ++i) {
        Tokens tokens(kTokens);
        for (auto& t : tokens) t = static_cast<int>(data_rng.uniform_int(0, static_cast<std::uint64_t>(model.vocab_size - 1)));
        batch.push_back({encode(tokens, cb, 0.1, data_rng).cast<double>(), tokens});
    }
    const Latent<double> silence = silence_latent(cb, kTokens * kFramesPerToken).cast<double>();
    AugmentConfig aug;
    aug.frame_rate = cb.frame_rate;

    // Embeddings start at a larger scale than in training so their gradients
    // are not vanishingly small.
    auto params = VectorFieldParams<double>::init(model, root.substream("init"));
    SeededRng emb_rng = root.substream("embeddings");
    for (Eigen::Index i = 0; i < params.token_embedding.size(); ++i) params.token_embedding.data()[i] = emb_rng.normal();
    for (Eigen::Index i = 0; i < params.null_embedding.size(); ++i) params.null_embedding.data()[i] = emb_rng.normal();
    for (auto& b : params.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = 0.1 * emb_rng.normal();

    const SeededRng step_rng = root.substream("step");
    std::vector<std::string> names;
    params.for_each_tensor([&](const std::string& name, const Matrix<double>&) { names.push_back(name); });

    for (std::size_t wi = 0; wi < opts.weights.size(); ++wi) {
        const LossWeights& w = opts.weights[wi];
        auto objective = [&](const VectorFieldParams<double>& p) {
            return training_step<double>(batch, p, silence, w, aug, step_rng).losses.total;
        };
        auto analytic = training_step<double>(batch, params, silence, w, aug, step_rng).grads;
        if (opts.flip_sign_of)
            analytic.for_each_tensor([&](const std::string& name, Matrix<double>& g) {
                if (name == *opts.flip_sign_of) g = -g;
            });

        SeededRng probe_rng = root.substream("probes").substream(wi);
        for (int k = 0; k < opts.probes; ++k) {
            // Cycle through tensors so every one is probed; within a tensor
            // pick a random entry.
            const std::string& name = names[static_cast<std::size_t>(k) % names.size()];
            GradcheckProbe probe;
            probe.weights = w;
            probe.tensor = name;
            auto perturbed = params;
            Matrix<double>* target = nullptr;
            perturbed.for_each_tensor([&](const std::string& n, Matrix<double>& m) {
                if (n == name) target = &m;
            });
            probe.index = static_cast<Eigen::Index>(probe_rng.uniform_int(0, static_cast<std::uint64_t>(target->size() - 1)));
            const double original = target->data()[probe.index];
            target->data()[probe.index] = original + opts.step;
            const double up = objective(perturbed);
            target->data()[probe.index] = original - opts.step;
            const double down = objective(perturbed);
            probe.numeric = (up - down) / (2.0 * opts.step);
            analytic.for_each_tensor([&](const std::string& n, const Matrix<double>& g) {
                if (n == name) probe.analytic = g.data()[probe.index];
            });
            const double scale = std::max({std::abs(probe.analytic), std::abs(probe.numeric), 1e-6});
            probe.rel_error = std::abs(probe.analytic - probe.numeric) / scale;
            if (probe.rel_error > report.max_rel_error || report.worst_tensor.empty()) {
                report.max_rel_error = probe.rel_error;
                report.worst_tensor = name;
            }
            report.probes.push_back(probe);
        }
    }
    report.pass = report.max_rel_error < opts.tolerance;
    return report;
}

std::string merge_report(const std::vector<std::filesystem::path>& metrics_files) {
    struct Pooled {
        std::size_t errors = 0;
        std::size_t ref_len = 0;
        std::size_t rows = 0;
    };
    std::map<std::uint64_t, std::map<std::string, Pooled>> table;
    std::set<std::string> columns;
    for (const auto& path : metrics_files) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path.string());
        std::string line;
        std::getline(in, line);
        if (line != kMetricsHeader) throw FormatError(path.string() + ": not a metrics CSV");
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::vector<std::string> f;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) f.push_back(cell);
            if (f.size() != 10) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 10 columns");
            try {
                const std::uint64_t step = std::stoull(f[0]);
                const std::string column = f[1] + "@nfe" + f[2];
                auto& p = table[step][column];
                p.errors += std::stoull(f[6]) + std::stoull(f[7]) + std::stoull(f[8]);
                p.ref_len += std::stoull(f[9]);
                ++p.rows;
                columns.insert(column);
            } catch (const std::invalid_argument&) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
            }
        }
    }
    std::ostringstream os;
    os << "step";
    for (const auto& c : columns) os << ',' << c;
    os << '\n';
    for (const auto& [step, row] : table) {
        os << step;
        for (const auto& c : columns) {
            os << ',';
            if (const auto it = row.find(c); it != row.end() && it->second.ref_len > 0)
                os << fixed(100.0 * static_cast<double>(it->second.errors) / static_cast<double>(it->second.ref_len), 4);
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace rsflow
