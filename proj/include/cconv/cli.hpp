#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace cconv {

/// Flat `key = value` configuration with dotted keys. Every known key has a
/// resolved value after parsing (empty string means "library default").
class RunConfig {
 public:
  /// Throws ConfigError naming the offending line or key.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  static RunConfig defaults() { return parse(""); }

  const std::string& get(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  bool has_value(const std::string& key) const { return !get(key).empty(); }
  double number(const std::string& key) const;
  long integer(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;

  /// All keys with resolved values, sorted; re-parsing it gives the same config.
  std::string echo() const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void resolve();
  std::map<std::string, std::string> values_;
};

/// Keys accepted in config files, with their defaults.
const std::vector<std::pair<std::string, std::string>>& config_keys();

struct RunOutcome {
  nlohmann::json report;
  int exit_status = 0;  // 0 completed, 2 negative finding
  std::vector<std::pair<std::string, std::string>> artifacts;  // file name, contents
  std::vector<std::pair<std::string, double>> timings;         // stage, seconds
};

const std::vector<std::string>& commands();

/// Runs one command. The report holds the config echo, the seed and the
/// per-analysis results; it is a pure function of (command, config).
/// Module errors propagate as StageError.
RunOutcome run(const std::string& command, const RunConfig& config);

class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Sorted keys, doubles with 17 significant digits, non-finite as null.
std::string serialize_json(const nlohmann::json& j);
/// One line per analysis with its verdict.
std::string serialize_summary(const nlohmann::json& report);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::string& path, const std::string& contents);

/// Runs and writes report.json, summary.txt, timings.json and the artifacts
/// into output_dir. Returns the exit status; errors are printed to `err`.
int run_to_directory(const std::string& command, const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace cconv
