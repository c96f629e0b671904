#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vdm/errors.hpp"

namespace vdm {

// Flat key=value run configuration with dotted section names, e.g.
// `schedule.kind=linear-lambda`. '#' starts a comment. The seed is mandatory
// and always explicit — there is no entropy-source default anywhere.
class RunConfig {
  public:
    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    std::string get_str(const std::string& key, const std::string& fallback) const;
    std::string require_str(const std::string& key) const;
    double get_num(const std::string& key, double fallback) const;
    std::uint64_t get_count(const std::string& key, std::uint64_t fallback) const;
    bool get_flag(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    const std::map<std::string, std::string>& entries() const { return kv_; }

    // Resolved per run (CLI overrides config-file values).
    std::string command;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = ".";

    std::uint64_t require_seed() const {
        if (!seed_set) throw ConfigError("seed is mandatory: pass --seed or set seed= in the config");
        return seed;
    }

  private:
    std::map<std::string, std::string> kv_;
};

}  // namespace vdm
