#ifndef ADVSEL_RUN_CONFIG_HPP
#define ADVSEL_RUN_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advsel/dataset.hpp"
#include "advsel/training.hpp"

namespace advsel {

/// Synthetic blob source. When means is unset, 2-class problems place the
/// class means at 0.5 -/+ separation/2 in every dimension; with more classes
/// the means are drawn from a seeded uniform in [0.25, 0.75]^dims.
struct SynthSpec {
    std::uint64_t seed = 7;
    std::size_t samples_per_class = 1250;
    std::size_t dims = 20;
    std::size_t classes = 2;
    double sigma = 0.1;
    double separation = 0.3;
    std::optional<std::vector<std::vector<double>>> means;
};

struct DatasetSpec {
    enum class Kind { synth, idx, csv, cache };
    Kind kind = Kind::synth;
    SynthSpec synth;
    std::string idx_images;
    std::string idx_labels;
    std::string csv_path;
    std::string csv_label_column = "label";
    std::string cache_path;
};

struct SplitSpec {
    SplitFractions fractions{0.8, 0.0, 0.2};
    std::uint64_t seed = 11;
};

/// Everything a run needs. Defaults are documented in the README; every
/// field can come from the config file, and the core train fields can be
/// overridden from the command line.
struct RunConfig {
    DatasetSpec dataset;
    SplitSpec split;
    std::vector<std::size_t> hidden{32, 32};
    std::optional<std::uint64_t> model_init_seed; // default derives from train.seed
    TrainConfig train;
    std::string out_dir = "runs/out";

    std::uint64_t effective_model_seed() const;
};

RunConfig default_run_config();

/// Parses a config file and merges it over the defaults. Unknown keys, type
/// errors and out-of-range values throw config_error.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Materializes the configured dataset source.
Dataset build_dataset(const DatasetSpec& spec);

/// One metrics line (schema-versioned JSON, newline-terminated). Keys are
/// emitted in sorted order so identical runs serialize identically;
/// wall-clock time is deliberately not part of the record.
std::string metrics_line(const EpochMetrics& m);
nlohmann::json metrics_to_json(const EpochMetrics& m);

/// Fixed column order for the curves CSV, matching the metrics schema plus
/// derived per-batch means.
std::vector<std::string> curves_csv_header();
std::string curves_csv_row(const nlohmann::json& record);

} // namespace advsel

#endif
