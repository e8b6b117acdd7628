#pragma once

#include "mobnp/core_model.hpp"
#include "mobnp/mcmc_engine.hpp"
#include "mobnp/simulation.hpp"
#include "mobnp/variable_selection.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mobnp {

/// Fields of one CSV record; quoted fields may hold commas and doubled quotes.
std::vector<std::string> split_csv_line(const std::string& line);

/// Header row of probe names, first column of patient ids, numeric body.
/// clip_eps > 0 clips into [eps, 1 - eps] before a logit transform.
PlatformMatrix load_platform(const std::filesystem::path& path, Transform transform, double clip_eps = 0.0);

/// Columns patient_id, time, event; rows reordered to `patient_order`.
ClinicalOutcomes load_clinical(const std::filesystem::path& path, const std::vector<std::string>& patient_order);

void write_platform(const std::filesystem::path& path, const PlatformMatrix& platform);
void write_clinical(const std::filesystem::path& path, const ClinicalOutcomes& outcomes,
                    const std::vector<std::string>& patient_ids);
/// Matrix with optional header and row names; numbers at full precision.
void write_matrix(const std::filesystem::path& path, const MatrixXd& m, const std::vector<std::string>& column_names = {},
                  const std::vector<std::string>& row_names = {}, const std::string& corner = "");
void write_matrix(const std::filesystem::path& path, const MatrixXi& m);
MatrixXd read_matrix(const std::filesystem::path& path, bool header, bool row_names);
/// name,cluster with 1-based clusters.
void write_allocation(const std::filesystem::path& path, const Allocation& alloc, const std::vector<std::string>& names,
                      const std::string& name_header);
Allocation read_allocation(const std::filesystem::path& path);

struct PlatformSpec {
    std::filesystem::path path;
    Transform transform = Transform::identity;
};

struct RunConfig {
    std::vector<PlatformSpec> platforms;
    std::optional<std::filesystem::path> clinical;
    double clip_eps = 0.0;
    SamplerConfig sampler;
    SelectionConfig selection;
    SimulationConfig simulation;
    SurvivalConfig survival;
    bool simulate_survival = false;
    ReplicationConfig replication;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "out";

    void validate(bool need_platforms) const;
};

/// Reads an INI file; relative data paths resolve against the file's directory.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
/// INI text of every setting, defaults included.
std::string format_config(const RunConfig& config);

TransformedDataset load_dataset(const RunConfig& config);

struct PipelineResult {
    Stage1Result stage1;
    std::optional<SelectionProblem> problem;
    std::optional<SelectionResult> selection;
};

/**
 * Stage 1, point estimates and, when clinical data are configured, Stage 2.
 * Writes every artifact into config.out_dir. Artifacts other than
 * manifest.jsonl depend only on the data, config and seed.
 */
PipelineResult run_pipeline(const RunConfig& config);

/// Stage 2 alone from the artifacts of an earlier fit in `fit_dir`.
SelectionResult run_selection_from_fit(const RunConfig& config, const std::filesystem::path& fit_dir);

/// Writes platform CSVs, truth files and a ready-to-fit config into config.out_dir.
void run_simulate(const RunConfig& config);

/// Replication study over config.replication; writes replicates.csv and summary.csv.
std::vector<ReplicateResult> run_replicate_study(const RunConfig& config);

std::string library_version();

} // namespace mobnp
