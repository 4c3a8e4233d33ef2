#pragma once

// One config = one experiment = one output directory with a manifest.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cusp/experiment_config.hpp"

namespace cusp {

enum class RunStatus : int { ok = 0, validation_failure = 2, runtime_failure = 3, acceptance_failure = 4 };

const char* to_string(RunStatus s);

/// Library version string.
const char* version();

struct RunResult {
    RunStatus status = RunStatus::ok;
    std::string message;
    std::vector<std::string> outputs;  ///< file names relative to the output directory
};

struct RunOverrides {
    std::optional<std::string> output_dir;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
};

/// Writes only plain file names under a fixed root.
class OutputDir
{
  public:
    explicit OutputDir(std::filesystem::path root);

    /// Rejects names with separators, "..", or absolute paths.
    std::filesystem::path file(const std::string& name) const;
    void write(const std::string& name, const std::string& content);

    [[nodiscard]] const std::filesystem::path& root() const { return root_; }
    [[nodiscard]] const std::vector<std::string>& written() const { return written_; }

  private:
    std::filesystem::path root_;
    std::vector<std::string> written_;
};

/// Shortest round-trip decimal form.
std::string format_number(double v);

/// Delimited-text table builder.
class Table
{
  public:
    explicit Table(std::vector<std::string> header);
    Table& row();
    Table& add(double v);
    Table& add(std::uint64_t v);
    Table& add(const std::string& v);
    [[nodiscard]] std::string str() const;

  private:
    std::string out_;
    std::size_t columns_;
    std::size_t filled_ = 0;
    bool open_ = false;
};

/// Never throws; every failure maps to a status.
RunResult run_experiment(const ExperimentConfig& config);

/// Loads, applies overrides, runs.
RunResult run_config_file(const std::string& path, const RunOverrides& overrides = {});

}  // namespace cusp
