#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgl {

/// Invalid or missing configuration; field is the dotted key ("graph.edges").
struct ConfigError : std::runtime_error {
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what), field(field) {}
    std::string field;
};

/// Failure inside a pipeline stage.
struct PipelineError : std::runtime_error {
    PipelineError(const std::string& stage, const std::string& what)
        : std::runtime_error("[" + stage + "] " + what), stage(stage) {}
    std::string stage;
};

/// Flat key-value configuration with [sections]. Lines are `key = value`;
/// '#' and ';' start comments. Keys are addressed as "section.key".
///
/// Every lookup records the value used (default included), so the resolved
/// view is a complete description of a run.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    /// "section.key=value".
    void apply_override(const std::string& assignment);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<long long> get_ints(const std::string& key, const std::vector<long long>& fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;
    /// An existing file path.
    std::filesystem::path get_path(const std::string& key) const;

    /// Throws ConfigError for the first key that no lookup has read.
    void check_consumed() const;

    const std::map<std::string, std::string>& values() const { return values_; }
    const std::map<std::string, std::string>& resolved() const { return resolved_; }

private:
    std::string raw(const std::string& key, const std::string& fallback) const;

    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> resolved_;
};

/// Runs the pipeline named by run.command and returns the JSON report. The
/// report is also written to run.output when that key is set.
std::string run_experiment(const Config& config);

/// Report JSON without the fields excluded from determinism comparisons.
std::string strip_volatile(const std::string& report);

}  // namespace cgl
