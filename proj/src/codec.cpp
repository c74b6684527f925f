#include "sparsepm/codec.hpp"

#include <cmath>

namespace sparsepm {

const char* to_string(Rule r) {
    switch (r) {
        case Rule::sed: return "sed";
        case Rule::sead: return "sead";
        case Rule::wmad_lookahead: return "wmad-lookahead";
    }
    return "?";
}

const char* to_string(FeedbackMode m) {
    return m == FeedbackMode::dense ? "dense" : "sparse";
}

Rule rule_from_string(const std::string& s) {
    if (s == "sed") return Rule::sed;
    if (s == "sead") return Rule::sead;
    if (s == "wmad-lookahead") return Rule::wmad_lookahead;
    throw std::invalid_argument("unknown rule: " + s);
}

FeedbackMode feedback_from_string(const std::string& s) {
    if (s == "dense") return FeedbackMode::dense;
    if (s == "sparse") return FeedbackMode::sparse;
    throw std::invalid_argument("unknown feedback mode: " + s);
}

void SessionConfig::validate() const {
    if (k < 1 || k > 127) throw std::invalid_argument("SessionConfig: K out of [1, 127]");
    if (!(epsilon > 0.0 && epsilon < 0.5)) {
        throw std::invalid_argument("SessionConfig: epsilon out of (0, 0.5)");
    }
    if (d_max < 1 || d_max > 24) throw std::invalid_argument("SessionConfig: Dmax out of [1, 24]");
}

Phase phase_of(const GroupedPosterior& state) {
    return state.top_value() >= 0.5 ? Phase::confirmation : Phase::communication;
}

Session::Session(const SessionConfig& cfg, const ChannelParams& ch) : cfg_(cfg), ch_(ch) {
    cfg_.validate();
}

const GroupedPosterior& Session::posterior() const {
    if (!posterior_) throw std::logic_error("Session: no posterior before systematic feedback");
    return *posterior_;
}

void Session::init_from_systematic(const Message& y_sys) {
    y_sys_ = y_sys;
    posterior_ = GroupedPosterior::systematic_init(cfg_.k, ch_, y_sys);
    t_ = cfg_.k;
    comm_symbols_ = cfg_.k;  // the systematic block always starts from the uniform prior
    if (posterior_->top_value() >= 1.0 - cfg_.epsilon) stopped_ = true;
}

PartitionPlan Session::make_block_plan() {
    const GroupedPosterior& st = *posterior_;
    plan_phase_ = phase_of(st);
    if (plan_phase_ == Phase::confirmation) {
        const BinaryPartition part = singleton_partition(st);
        PartitionPlan plan;
        plan.d = 1;
        plan.bins = {part.s0, part.s1};
        plan.bin_mass = {part.p0, part.p1};
        plan.delta_k = {part.p0 - 0.5, part.p1 - 0.5};
        plan.delta_max_total = std::abs(part.delta);
        plan.delta_max_bin = 0.5 * std::abs(part.delta);
        plan.rho_min_schedule = {st.median_value().value};
        plan.gamma = 1.0;  // placeholder; confirmation plans carry no gamma budget
        plan.rho_gamma_planned = 0.0;
        return plan;
    }
    switch (cfg_.rule) {
        case Rule::sed: {
            const BinaryPartition part = build_sed_partition(st);
            PartitionPlan plan;
            plan.d = 1;
            plan.bins = {part.s0, part.s1};
            plan.bin_mass = {part.p0, part.p1};
            plan.delta_k = {part.p0 - 0.5, part.p1 - 0.5};
            plan.delta_max_total = std::abs(part.delta);
            plan.delta_max_bin = 0.5 * std::abs(part.delta);
            plan.rho_min_schedule = {st.median_value().value};
            plan.gamma = 1.0;
            plan.rho_gamma_planned = 0.0;
            return plan;
        }
        case Rule::sead:
            return plan_block(st, ch_, 1);
        case Rule::wmad_lookahead:
            return plan_block(st, ch_, cfg_.feedback == FeedbackMode::dense ? 1 : cfg_.d_max);
    }
    throw std::logic_error("make_block_plan: unreachable");
}

std::size_t Session::absorb_bits(const std::vector<int>& bits, bool comm_block,
                                 TrackedMessage* tracked) {
    BlockCursor cursor(*posterior_, std::span<const SliceSet>(plan_->bins), plan_->d);
    const double threshold = 1.0 - cfg_.epsilon;
    double top = posterior_->top_value();
    std::size_t used = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (comm_block) {
            // Realized WMAD guard. The plan's budget makes the cheap bound
            // hold for every prefix; the true median is the slow tiebreaker.
            const double delta = cursor.next_step_delta();
            const double bound = 0.4 * plan_->rho_min_schedule[cursor.steps()];
            if (delta * delta > bound &&
                delta * delta > 0.4 * cursor.current_median() + 1e-12) {
                throw std::logic_error("absorb_bits: realized partition broke WMAD");
            }
        }
        if (top < 0.5) ++comm_symbols_;
        top = cursor.absorb(bits[i]);
        ++used;
        if (top >= threshold) break;
    }
    cursor.finish(tracked);
    t_ += static_cast<int>(used);
    if (top >= threshold) stopped_ = true;
    return used;
}

void Session::trace(const char* dir, const std::vector<int>& bits, bool stop) const {
    if (!trace_) return;
    std::string s;
    s.reserve(bits.size());
    for (int b : bits) s.push_back(b ? '1' : '0');
    (*trace_) << "t=" << (t_ + 1) << " dir=" << dir << " bits=" << s;
    if (stop) (*trace_) << " stop=1";
    (*trace_) << "\n";
}

EncoderSession::EncoderSession(const SessionConfig& cfg, const ChannelParams& ch, Message theta)
    : Session(cfg, ch), theta_(std::move(theta)) {
    if (static_cast<int>(theta_.size()) != cfg_.k) {
        throw std::invalid_argument("EncoderSession: theta length != K");
    }
}

ForwardBlock EncoderSession::next_block() {
    if (stopped_) throw ProtocolError("encoder: session already stopped");
    if (awaiting_feedback_) throw ProtocolError("encoder: feedback not yet absorbed");

    ForwardBlock blk;
    blk.start_time = t_ + 1;
    if (!started()) {
        // Systematic phase: the message bits themselves, s_1 = K.
        blk.bits.assign(theta_.begin(), theta_.end());
    } else {
        plan_ = make_block_plan();
        const std::uint32_t bin = find_bin(*plan_, tracked_);
        blk.bits.resize(plan_->d);
        for (int j = 0; j < plan_->d; ++j) {
            blk.bits[j] = static_cast<int>((bin >> (plan_->d - 1 - j)) & 1u);
        }
    }
    trace("fwd", blk.bits, false);
    awaiting_feedback_ = true;
    return blk;
}

void EncoderSession::absorb_feedback(const FeedbackPacket& packet) {
    if (!awaiting_feedback_) throw ProtocolError("encoder: unexpected feedback");
    if (packet.start_time != t_ + 1) throw ProtocolError("encoder: feedback time mismatch");

    if (!started()) {
        if (static_cast<int>(packet.bits.size()) != cfg_.k) {
            throw ProtocolError("encoder: systematic feedback length mismatch");
        }
        Message y_sys(packet.bits.begin(), packet.bits.end());
        init_from_systematic(y_sys);
        tracked_ = posterior_->track_from_root(locate_message(theta_, y_sys));
        if (packet.stop != stopped_) throw ProtocolError("encoder: stop flag mismatch");
        awaiting_feedback_ = false;
        return;
    }

    if (packet.bits.size() > static_cast<std::size_t>(plan_->d) ||
        (!packet.stop && packet.bits.size() != static_cast<std::size_t>(plan_->d))) {
        throw ProtocolError("encoder: feedback length mismatch");
    }
    const bool comm = plan_phase_ == Phase::communication;
    const std::size_t used = absorb_bits(packet.bits, comm, &tracked_);
    if (used != packet.bits.size() || packet.stop != stopped_) {
        throw ProtocolError("encoder: stop disagreement with decoder");
    }
    awaiting_feedback_ = false;
}

DecoderSession::DecoderSession(const SessionConfig& cfg, const ChannelParams& ch)
    : Session(cfg, ch) {}

FeedbackPacket DecoderSession::absorb(int start_time, const std::vector<int>& y) {
    if (stopped_) throw ProtocolError("decoder: session already stopped");
    if (start_time != t_ + 1) throw ProtocolError("decoder: block time mismatch");

    FeedbackPacket packet;
    packet.start_time = start_time;
    if (!started()) {
        if (static_cast<int>(y.size()) != cfg_.k) {
            throw ProtocolError("decoder: systematic block length mismatch");
        }
        init_from_systematic(Message(y.begin(), y.end()));
        packet.bits = y;
        packet.stop = stopped_;
        trace("fb", packet.bits, packet.stop);
        return packet;
    }

    plan_ = make_block_plan();
    if (y.size() != static_cast<std::size_t>(plan_->d)) {
        throw ProtocolError("decoder: block length does not match the plan");
    }
    const bool comm = plan_phase_ == Phase::communication;
    const std::size_t used = absorb_bits(y, comm, nullptr);
    packet.bits.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(used));
    packet.stop = stopped_;
    trace("fb", packet.bits, packet.stop);
    return packet;
}

Message DecoderSession::estimate() const {
    if (!stopped_) throw std::logic_error("decoder: estimate before the stopping rule fired");
    const GroupedPosterior& st = posterior();
    // Mid-block stopping evaluates the threshold on cursor values; allow the
    // committed state an ulp of slack.
    if (st.top_value() < (1.0 - cfg_.epsilon) * (1.0 - 1e-12)) {
        throw std::logic_error("decoder: stopped state below threshold");
    }
    if (st.groups().front().count != 1) {
        throw std::logic_error("decoder: arg-max group is not a singleton");
    }
    return unrank(st.resolve_member(0, 0), y_sys_);
}

}  // namespace sparsepm
