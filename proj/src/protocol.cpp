#include "openrc/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace openrc {

const char* to_string(OperatingMode m) {
    switch (m) {
        case OperatingMode::Remaining: return "remaining";
        case OperatingMode::Departing: return "departing";
        case OperatingMode::Arriving: return "arriving";
        case OperatingMode::Inactive: return "inactive";
    }
    return "?";
}

OperatingMode classify_mode(bool active_now, bool active_next) {
    if (active_now) return active_next ? OperatingMode::Remaining : OperatingMode::Departing;
    return active_next ? OperatingMode::Arriving : OperatingMode::Inactive;
}

int feedback(OperatingMode sender_mode_of_l, bool receiver_active) {
    if (!receiver_active)
        throw ProtocolError("feedback queried for a receiver that is not active");
    switch (sender_mode_of_l) {
        case OperatingMode::Remaining: return 1;
        case OperatingMode::Departing: return 0;
        default:
            throw ProtocolError("feedback queried from an agent outside the active graph");
    }
}

double RoundWeights::c(AgentId l, AgentId j) const {
    const SenderWeights& w = senders[j];
    if (w.mode != OperatingMode::Remaining) return 0.0;
    if (l == j) return w.c;
    return std::binary_search(w.recipients.begin(), w.recipients.end(), l) ? w.c : 0.0;
}

double RoundWeights::c_tilde(AgentId l, AgentId j) const {
    const SenderWeights& w = senders[j];
    if (w.mode != OperatingMode::Departing) return 0.0;
    return std::binary_search(w.recipients.begin(), w.recipients.end(), l) ? w.c_tilde : 0.0;
}

SenderWeights assign_remaining_weights(AgentId, const std::vector<AgentId>& remaining_out) {
    SenderWeights w;
    w.mode = OperatingMode::Remaining;
    w.c = 1.0 / static_cast<double>(1 + remaining_out.size());
    w.recipients = remaining_out;
    return w;
}

SenderWeights assign_departing_weights(AgentId j, const std::vector<AgentId>& remaining_out) {
    if (remaining_out.empty()) {
        std::ostringstream os;
        os << "stranded departing mass: agent " << j
           << " departs with no remaining out-neighbor";
        throw ProtocolError(os.str());
    }
    SenderWeights w;
    w.mode = OperatingMode::Departing;
    w.c_tilde = 1.0 / static_cast<double>(remaining_out.size());
    w.recipients = remaining_out;
    return w;
}

BroadcastPair broadcast_values(const AgentState& s, OperatingMode mode,
                               double per_recipient_c, double per_recipient_c_tilde) {
    switch (mode) {
        case OperatingMode::Remaining:
            return {per_recipient_c * s.x, per_recipient_c * s.y};
        case OperatingMode::Departing:
            return {per_recipient_c_tilde * (s.x - s.x_hat),
                    per_recipient_c_tilde * (s.y - s.y_hat)};
        default:
            throw ProtocolError("broadcast requested from an agent that is not sending");
    }
}

AgentState arriving_update(double joining_mass) {
    AgentState s;
    s.x = s.x_hat = joining_mass;
    s.y = s.y_hat = 1.0;
    s.z = s.x / s.y;
    s.active = true;
    return s;
}

RemainingUpdateResult remaining_update(const AgentState& s,
                                       std::span<const Contribution> from_remaining,
                                       std::span<const Contribution> from_departing) {
    double x = 0.0;
    double y = 0.0;
    // Merge the two sorted inboxes so terms accumulate in ascending
    // sender order regardless of how the lists were split.
    std::size_t r = 0, d = 0;
    while (r < from_remaining.size() || d < from_departing.size()) {
        const Contribution* next;
        if (d == from_departing.size() ||
            (r < from_remaining.size() &&
             from_remaining[r].sender < from_departing[d].sender)) {
            next = &from_remaining[r++];
        } else {
            next = &from_departing[d++];
        }
        x += next->value.zeta_x;
        y += next->value.zeta_y;
    }

    RemainingUpdateResult out;
    out.state = s;
    out.state.x = x;
    out.state.y = y;
    if (std::abs(y) <= kYGuard) {
        out.degenerate = true;  // z keeps its previous value
    } else {
        out.state.z = x / y;
    }
    out.state.active = true;
    return out;
}

AgentState departing_finalize(const AgentState&) {
    return AgentState{};
}

} // namespace openrc
