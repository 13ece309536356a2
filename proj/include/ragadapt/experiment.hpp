#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ragadapt/finetune.hpp"
#include "ragadapt/theory.hpp"
#include "ragadapt/world.hpp"

// Config-driven experiment runner: shots sweep x retrieval mode x head x
// ensemble-weight grid over freshly generated worlds, plus the theory-check
// sweep behind the `verify` subcommand. All output files are written to a
// temporary name and atomically renamed; identical configs and seeds give
// byte-identical files regardless of thread count.
namespace ragadapt {

// EN_F is the ensemble head with the cache fine-tuned on a held-out train set.
enum class ExperimentHead { ZOC, RET, EN, EN_F };

const char* head_name(ExperimentHead h);
const char* mode_name(RetrievalMode m);

struct WeightPoint {
    double alpha = 0.5;
    double gamma = 0.5;
};

// Parameters of the `verify` sweep (counts per check documented in README).
struct VerifyConfig {
    std::size_t worlds = 50;
    std::size_t samples = 2000;
    std::size_t uni_trials = 20;
    std::vector<std::size_t> uni_k{1, 4, 16};
    double uni_delta = 0.1;
    double uni_alpha = 0.5;
    double uni_gamma = 0.5;
    std::size_t ensemble_k = 16;
    std::size_t bernstein_trials = 300;
    std::size_t bernstein_k = 16;
    double bernstein_delta = 0.05;
    std::size_t lipschitz_trials = 100000;  // per class count
    std::vector<std::size_t> lipschitz_classes{2, 10, 100};
};

struct ExperimentConfig {
    WorldConfig world;
    std::vector<std::size_t> shots{1, 2, 4, 8, 16};
    std::size_t seeds_per_class = 1;  // I2I query images per class
    std::vector<RetrievalMode> modes{RetrievalMode::T2I, RetrievalMode::I2I,
                                     RetrievalMode::OracleId};
    std::vector<ExperimentHead> heads{ExperimentHead::ZOC, ExperimentHead::RET,
                                      ExperimentHead::EN};
    std::vector<WeightPoint> weights{{0.5, 0.5}};
    double omega = 1.0;
    std::size_t trials = 5;
    std::size_t test_n = 1000;
    std::size_t train_n = 256;  // EN_F fine-tuning set size
    FinetuneOptions finetune;
    std::uint64_t master_seed = 1;
    VerifyConfig verify;

    void validate() const;  // throws ConfigError
};

// Sectioned `key = value` text; full-line # comments; unknown keys are
// line-numbered ConfigErrors. Layout documented in README and configs/.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);

struct ResultRow {
    std::size_t trial = 0;
    std::size_t k = 0;
    RetrievalMode mode = RetrievalMode::T2I;
    ExperimentHead head = ExperimentHead::ZOC;
    double alpha = 0.0;
    double gamma = 0.0;
    double omega = 1.0;
    double accuracy = 0.0;
    double ce_risk = 0.0;
};

// All rows of a run, trial-major, inner order shots > modes > heads > weights.
std::vector<ResultRow> run_rows(const ExperimentConfig& config, std::size_t threads);

// CSV render/parse; floats as %.17g so a read-back is value-exact.
std::string results_csv_text(const std::vector<ResultRow>& rows);
std::string summary_csv_text(const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

// results.csv + summary.csv + manifest.txt under out_dir.
void run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    std::size_t threads, std::ostream* log);

// theory_report.csv + theory_report.txt + manifest.txt under out_dir.
// Returns true iff every applicable check passed; not-applicable checks are
// reported as warnings on `log`.
bool verify_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       std::size_t threads, std::ostream* log);

// Recomputes summary.csv from the results.csv already in out_dir.
void rebuild_summary(const std::filesystem::path& out_dir);

}  // namespace ragadapt
