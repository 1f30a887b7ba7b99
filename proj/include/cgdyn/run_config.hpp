#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cgdyn/core.hpp"

namespace cgdyn {

/// Line-oriented `key = value` configuration with `[section]` headers.
/// Keys before the first header form the global section "". Validation is strict:
/// unknown sections and keys are rejected, all of them listed in one error.
class RunConfig {
public:
    using Section = std::map<std::string, std::string>;

    static const std::map<std::string, std::set<std::string>>& schema() {
        static const std::map<std::string, std::set<std::string>> s = {
            {"", {"model", "rc", "beta", "epsilon", "l0", "theta0", "ktheta", "dt", "seed", "workers", "out"}},
            {"table", {"engine", "file", "z_min", "z_max", "dz", "refine_min", "refine_max", "refine_dz",
                       "mc_steps", "mc_dt"}},
            {"estimate-coefficients", {"output"}},
            {"simulate", {"dynamics", "x0", "T", "stride", "output"}},
            {"residence", {"threshold", "n", "dynamics", "sample_stride", "sample_cap", "step_cap", "output"}},
            {"pathwise", {"epsilons", "T", "replicas", "x0", "stride", "output"}},
            {"marginals", {"t", "n", "bins", "x0", "output"}},
            {"check", {"points", "output"}},
        };
        return s;
    }

    static const std::set<std::string>& commands() {
        static const std::set<std::string> c = {"estimate-coefficients", "simulate", "residence",
                                                "pathwise", "marginals", "check"};
        return c;
    }

    static RunConfig parse(std::istream& in, const std::string& command) {
        if (!commands().count(command)) throw config_error("unknown command '" + command + "'");
        RunConfig cfg;
        cfg.command_ = command;
        cfg.sections_[""];
        std::string line, section;
        std::vector<std::string> unknown;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw config_error("line " + std::to_string(lineno) + ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                if (!schema().count(section)) unknown.push_back("[" + section + "]");
                cfg.sections_[section];
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw config_error("line " + std::to_string(lineno) + ": expected 'key = value'");
            }
            const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
            const auto it = schema().find(section);
            if (it != schema().end() && !it->second.count(key)) {
                unknown.push_back(section.empty() ? key : section + "." + key);
            }
            if (cfg.sections_[section].count(key)) {
                throw config_error("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
            }
            cfg.sections_[section][key] = value;
        }
        if (!unknown.empty()) {
            std::string msg = "unknown configuration keys:";
            for (const auto& u : unknown) msg += " " + u;
            throw config_error(msg);
        }
        for (const char* req : {"model", "rc", "beta"}) {
            if (!cfg.has("", req)) throw config_error(std::string("missing required key '") + req + "'");
        }
        return cfg;
    }

    static RunConfig parse_string(const std::string& text, const std::string& command) {
        std::istringstream is(text);
        return parse(is, command);
    }

    /// Canonical text form; parsing it back yields an equal config.
    std::string serialize() const {
        std::ostringstream os;
        for (const auto& [section, kv] : sections_) {
            if (!section.empty()) os << "[" << section << "]\n";
            for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
        }
        return os.str();
    }

    /// Serialized form as comment lines, for artifact headers.
    std::vector<std::string> header_lines() const {
        std::vector<std::string> out{"cgdyn " + command_};
        std::istringstream is(serialize());
        std::string l;
        while (std::getline(is, l)) out.push_back(l);
        return out;
    }

    const std::string& command() const noexcept { return command_; }
    bool has(const std::string& section, const std::string& key) const {
        const auto it = sections_.find(section);
        return it != sections_.end() && it->second.count(key);
    }
    void set(const std::string& section, const std::string& key, const std::string& value) {
        sections_[section][key] = value;
    }
    /// Records a default so that the resolved configuration is complete.
    void set_default(const std::string& section, const std::string& key, const std::string& value) {
        if (!has(section, key)) set(section, key, value);
    }

    std::string str(const std::string& section, const std::string& key) const {
        if (!has(section, key)) throw config_error("missing required key '" + qualified(section, key) + "'");
        return sections_.at(section).at(key);
    }
    double num(const std::string& section, const std::string& key) const {
        return to_double(str(section, key), qualified(section, key));
    }
    double positive(const std::string& section, const std::string& key) const {
        const double v = num(section, key);
        if (!(v > 0.0)) throw config_error("'" + qualified(section, key) + "' must be positive");
        return v;
    }
    std::uint64_t count(const std::string& section, const std::string& key) const {
        const std::string s = str(section, key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size() || v < 0.0 || v != std::floor(v)) throw std::invalid_argument(s);
            return static_cast<std::uint64_t>(v);
        } catch (const std::exception&) {
            throw config_error("'" + qualified(section, key) + "' must be a non-negative integer, got '" + s + "'");
        }
    }
    std::vector<double> list(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        std::istringstream is(str(section, key));
        std::string cell;
        while (std::getline(is, cell, ',')) out.push_back(to_double(trim(cell), qualified(section, key)));
        if (out.empty()) throw config_error("'" + qualified(section, key) + "' is empty");
        return out;
    }
    std::vector<std::string> words(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        std::istringstream is(str(section, key));
        std::string cell;
        while (std::getline(is, cell, ',')) out.push_back(trim(cell));
        return out;
    }

    friend bool operator==(const RunConfig& a, const RunConfig& b) {
        return a.command_ == b.command_ && a.sections_ == b.sections_;
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }
    static std::string qualified(const std::string& section, const std::string& key) {
        return section.empty() ? key : section + "." + key;
    }
    static double to_double(const std::string& s, const std::string& name) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw config_error("'" + name + "' is not a number: '" + s + "'");
        }
    }

    std::string command_;
    std::map<std::string, Section> sections_;
};

}  // namespace cgdyn
