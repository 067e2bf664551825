#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace openrc {

using AgentId = std::uint32_t;
using Round = std::uint32_t;

/// Boolean activation flags over the agent pool; alpha(k) in vector form.
class ActivationVector {
public:
    ActivationVector() = default;
    explicit ActivationVector(std::size_t pool_size, bool all_active = false)
        : flags_(pool_size, all_active ? 1 : 0) {}

    bool operator[](AgentId j) const { return flags_[j] != 0; }
    void set(AgentId j, bool on) { flags_[j] = on ? 1 : 0; }
    std::size_t size() const { return flags_.size(); }

    int active_count() const {
        int n = 0;
        for (auto f : flags_) n += f;
        return n;
    }

    std::vector<AgentId> active_ids() const {
        std::vector<AgentId> ids;
        for (AgentId j = 0; j < flags_.size(); ++j)
            if (flags_[j]) ids.push_back(j);
        return ids;
    }

    bool operator==(const ActivationVector&) const = default;

private:
    std::vector<std::uint8_t> flags_;
};

/// Scenario file syntax error; line is 1-based, 0 for end-of-file checks.
class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& msg)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Semantically invalid scenario: bad initial topology, scripted event
/// that fails transition validation, and similar fatal setup errors.
class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violation of the per-round message rules, e.g. a departing agent with
/// no remaining out-neighbor to take its residual mass.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A runtime check (mass preservation, column stochasticity, strong
/// connectivity) exceeded its tolerance.
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace openrc
