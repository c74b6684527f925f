#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "sparsepm/block_cursor.hpp"
#include "sparsepm/lookahead.hpp"

namespace sparsepm {

enum class Phase { systematic, communication, confirmation };
enum class Rule { sed, sead, wmad_lookahead };
enum class FeedbackMode { dense, sparse };

const char* to_string(Rule r);
const char* to_string(FeedbackMode m);
Rule rule_from_string(const std::string& s);
FeedbackMode feedback_from_string(const std::string& s);

// Violations of the packet contract between the two sessions.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ForwardBlock {
    int start_time = 0;          // symbol index of the first bit, 1-based
    std::vector<int> bits;       // D_l bits; bin label of the bin holding theta
};

struct FeedbackPacket {
    int start_time = 0;
    std::vector<int> bits;       // received bits, possibly truncated at the stop
    bool stop = false;           // threshold crossed at the last contained bit
};

struct SessionConfig {
    int k = 8;
    double epsilon = 1e-3;       // stopping threshold 1 - epsilon
    int d_max = 12;
    Rule rule = Rule::wmad_lookahead;
    FeedbackMode feedback = FeedbackMode::sparse;

    void validate() const;
};

// Communication while every posterior value is below 1/2 (U < 0 for all
// messages); confirmation once some value reaches 1/2 (U >= 0). The phase can
// fall back to communication on disconfirming feedback.
Phase phase_of(const GroupedPosterior& state);

/**
 * Shared per-side protocol state. Encoder and decoder both derive each block's
 * partition plan from their own posterior; determinism of the planner keeps
 * the two in lockstep, which tests verify by fingerprint comparison.
 */
class Session {
public:
    Session(const SessionConfig& cfg, const ChannelParams& ch);

    bool started() const { return static_cast<bool>(posterior_); }
    bool stopped() const { return stopped_; }
    int time() const { return t_; }
    const GroupedPosterior& posterior() const;
    const SessionConfig& config() const { return cfg_; }

    // Symbols sent while the pre-symbol state was still in the communication
    // phase (systematic symbols included).
    int communication_symbols() const { return comm_symbols_; }

    void set_trace(std::ostream* sink) { trace_ = sink; }

protected:
    // Plan for the next block given the current posterior and configuration.
    PartitionPlan make_block_plan();
    // Applies one block's received bits; returns the number absorbed before
    // (and including) a threshold crossing, or bits.size() if none crossed.
    std::size_t absorb_bits(const std::vector<int>& bits, bool comm_block,
                            TrackedMessage* tracked);
    void init_from_systematic(const Message& y_sys);
    void trace(const char* dir, const std::vector<int>& bits, bool stop) const;

    SessionConfig cfg_;
    ChannelParams ch_;
    std::optional<GroupedPosterior> posterior_;
    std::optional<PartitionPlan> plan_;   // plan of the in-flight block
    Phase plan_phase_ = Phase::systematic;
    Message y_sys_;
    int t_ = 0;
    int comm_symbols_ = 0;
    bool stopped_ = false;
    std::ostream* trace_ = nullptr;
};

class EncoderSession : public Session {
public:
    EncoderSession(const SessionConfig& cfg, const ChannelParams& ch, Message theta);

    // Next forward block; requires all previous feedback absorbed.
    ForwardBlock next_block();
    void absorb_feedback(const FeedbackPacket& packet);

    const Message& theta() const { return theta_; }

    // Current posterior value of the true message (encoder-side bookkeeping).
    double theta_posterior() const { return posterior().groups()[tracked_.group].value; }

private:
    Message theta_;
    TrackedMessage tracked_;
    bool awaiting_feedback_ = false;
};

class DecoderSession : public Session {
public:
    DecoderSession(const SessionConfig& cfg, const ChannelParams& ch);

    // Processes the received bits of one forward block, one at a time,
    // truncating at a threshold crossing; returns the feedback packet.
    FeedbackPacket absorb(int start_time, const std::vector<int>& y);

    // Final estimate; requires the stopping rule to have fired.
    Message estimate() const;
};

}  // namespace sparsepm
