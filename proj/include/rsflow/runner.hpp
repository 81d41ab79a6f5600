#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rsflow/checkpoint.hpp"
#include "rsflow/config.hpp"
#include "rsflow/metrics.hpp"
#include "rsflow/sampler.hpp"

namespace rsflow {

/// Synthesizer backed by a model: utterance k of a call with seed s draws
/// its noise from SeededRng(s).substream(k). Work is split across threads by
/// utterance; the output order is always the input order.
Synthesizer make_synthesizer(const VectorFieldParams<float>& params, Eigen::Index frames, double frame_rate,
                             int nfe, double cfg_weight, int threads = 1);

inline constexpr const char* kMetricsHeader = "step,variant,nfe,seed,cer_pct,wer_pct,subs,ins,dels,ref_len";
inline constexpr const char* kSummaryHeader = "step,variant,nfe,seeds,cer_pct,wer_pct,subs,ins,dels,ref_len";
inline constexpr const char* kLossHeader = "step,pos,rand,aug,total";

/// One CSV row per seed for a single (step, variant, nfe) evaluation.
std::string metrics_rows(std::uint64_t step, const std::string& variant, int nfe, const EvalReport& report);
std::string summary_row(std::uint64_t step, const std::string& variant, int nfe, const EvalReport& report);

struct TrainOptions {
    int threads = 1;
    std::ostream* log = nullptr;
};

struct TrainResult {
    std::filesystem::path final_checkpoint;
    std::filesystem::path metrics_csv;
    std::filesystem::path summary_csv;
    std::filesystem::path losses_csv;
    std::uint64_t steps = 0;
    LossBreakdown last_losses;
    std::size_t divergence_warnings = 0;
};

/// Builds codebook and data from the seed, runs total_steps training steps
/// with Adam, evaluates every eval_every steps and writes checkpoints and
/// CSVs under cfg.output_dir.
TrainResult run_train(const RunConfig& cfg, const TrainOptions& opts = {});

/// Everything run_train derives from the seed before the first step.
struct TrainSetup {
    Codebook codebook;
    Dataset dataset;
    VectorFieldParams<float> params;
    LatentSequence silence;
};
TrainSetup prepare_training(const RunConfig& cfg);

/// Per-step randomness used by run_train: batch indices come from
/// step_rng.substream("batch"), item draws from step_rng.substream("items").
SeededRng training_step_rng(std::uint64_t seed, std::uint64_t step);
std::vector<std::size_t> sample_batch_indices(const SeededRng& step_rng, std::size_t dataset_size, int batch_size);

struct EvalRequest {
    std::filesystem::path checkpoint;
    std::filesystem::path codebook;
    std::filesystem::path dataset;
    std::vector<int> nfe{12, 24};
    std::vector<std::uint64_t> seeds{1, 2};
    double cfg_weight = 3.0;
    std::string variant = "unknown";
    std::filesystem::path output_dir = ".";
    int threads = 1;
};

struct EvalFiles {
    std::filesystem::path metrics_csv;
    std::filesystem::path summary_csv;
    std::filesystem::path utterances_csv;
};

/// Validates every input before writing anything.
EvalFiles run_eval(const EvalRequest& req);

struct GradcheckProbe {
    LossWeights weights;
    std::string tensor;
    Eigen::Index index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradcheckOptions {
    std::vector<LossWeights> weights{LossWeights::robust(), LossWeights::baseline()};
    int probes = 20;
    double step = 1e-3;
    double tolerance = 1e-4;
    /// Fault injection: negate the analytic gradient of this tensor.
    std::optional<std::string> flip_sign_of;
};

struct GradcheckReport {
    bool pass = false;
    double max_rel_error = 0.0;
    std::string worst_tensor;
    std::size_t parameter_count = 0;
    std::vector<GradcheckProbe> probes;
};

inline constexpr std::size_t kGradcheckMaxParams = 500;

/// The ≤500-parameter configuration used by default.
ModelConfig tiny_model_config();

/// Central finite differences of the full training objective on double
/// parameters, for each loss weighting in opts.weights.
GradcheckReport run_gradcheck(const ModelConfig& model, std::uint64_t seed, const GradcheckOptions& opts = {});

/// Merges metrics CSVs into a step x (variant, nfe) table of pooled CER.
std::string merge_report(const std::vector<std::filesystem::path>& metrics_files);

}  // namespace rsflow
