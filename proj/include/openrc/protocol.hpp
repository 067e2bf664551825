#pragma once

#include <span>
#include <vector>

#include "openrc/types.hpp"

namespace openrc {

/// Per-agent consensus variables. x carries mass, y is the auxiliary
/// counter that compensates for directed (unbalanced) information flow,
/// z = x/y is the ratio estimate. x_hat/y_hat hold the values registered
/// when the agent last joined; inactive agents carry all zeros.
struct AgentState {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double x_hat = 0.0;
    double y_hat = 0.0;
    bool active = false;

    bool operator==(const AgentState&) const = default;
};

/// Role of an agent in round k, derived from its activation at k and k+1.
enum class OperatingMode {
    Remaining,  // active at k and k+1
    Departing,  // active at k, gone at k+1
    Arriving,   // inactive at k, active at k+1
    Inactive,   // inactive at both
};

const char* to_string(OperatingMode m);

OperatingMode classify_mode(bool active_now, bool active_next);

/// One-bit acknowledgement sent by out-neighbor l back to the data sender:
/// 1 while l remains, 0 when l departs. Querying a link whose endpoint is
/// not active at k is a protocol error: that link is not in G(k).
int feedback(OperatingMode sender_mode_of_l, bool receiver_active);

/// Outgoing weights of one sender for one round. Weights are uniform
/// across recipients, so a single value plus the recipient list is the
/// whole assignment.
struct SenderWeights {
    OperatingMode mode = OperatingMode::Inactive;
    double c = 0.0;                    // c_lj, remaining senders (self included)
    double c_tilde = 0.0;              // residual weight, departing senders
    std::vector<AgentId> recipients;   // out(j) among remaining agents, ascending
};

/// Weight assignment of a full round, indexed by sender.
struct RoundWeights {
    std::vector<SenderWeights> senders;

    /// c_lj: weight sender j puts on recipient l (l == j for the self term).
    double c(AgentId l, AgentId j) const;
    /// Residual weight sender j puts on recipient l.
    double c_tilde(AgentId l, AgentId j) const;
};

/// Remaining agent j splits its mass evenly over its remaining
/// out-neighbors and itself: 1/(1 + |remaining_out|) each. An empty
/// remaining_out is legal; the agent then keeps everything.
SenderWeights assign_remaining_weights(AgentId j, const std::vector<AgentId>& remaining_out);

/// Departing agent j splits its residual evenly over its remaining
/// out-neighbors: 1/|remaining_out| each, no self weight. An empty
/// remaining_out means the residual has nowhere to go; scenarios are
/// validated to prevent this, so hitting it is fatal.
SenderWeights assign_departing_weights(AgentId j, const std::vector<AgentId>& remaining_out);

/// The pair (zeta_x, zeta_y) a sender broadcasts; identical for every
/// recipient because the weights are uniform.
struct BroadcastPair {
    double zeta_x = 0.0;
    double zeta_y = 0.0;

    bool operator==(const BroadcastPair&) const = default;
};

/// Remaining sender: (c*x, c*y). Departing sender: residual relative to
/// the joining values, (c_tilde*(x - x_hat), c_tilde*(y - y_hat)).
BroadcastPair broadcast_values(const AgentState& s, OperatingMode mode,
                               double per_recipient_c, double per_recipient_c_tilde);

/// State of an agent that joins with the given mass: x = x_hat = mass,
/// y = y_hat = 1, z = mass. It starts exchanging messages the next round.
AgentState arriving_update(double joining_mass);

struct Contribution {
    AgentId sender = 0;
    BroadcastPair value;
};

struct RemainingUpdateResult {
    AgentState state;
    bool degenerate = false;  // |y'| fell inside the guard band
};

/// Division guard for z = x/y. A departing residual can drive a y
/// transiently to zero; when |y'| is at or below this bound, z holds its
/// previous value and the round is flagged instead of emitting inf/nan.
inline constexpr double kYGuard = 1e-12;

/// New state of a remaining agent from its round-k inbox. from_remaining
/// covers remaining in-neighbors plus the agent's own contribution;
/// from_departing covers departing in-neighbors. Both lists must be
/// sorted by sender; summation runs over the merged lists in ascending
/// sender order so that runs reproduce bit-for-bit.
RemainingUpdateResult remaining_update(const AgentState& s,
                                       std::span<const Contribution> from_remaining,
                                       std::span<const Contribution> from_departing);

/// Zeroed, inactive state of an agent that has broadcast and left.
AgentState departing_finalize(const AgentState& s);

} // namespace openrc
