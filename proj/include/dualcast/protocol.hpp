#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "dualcast/membership.hpp"
#include "dualcast/overlay.hpp"

namespace dualcast {

enum class RoundKind : std::uint8_t { unreliable, unreliable_first, reliable };

struct StateLabel {
  std::uint64_t epoch = 1;
  std::uint64_t round = 0;
  RoundKind kind = RoundKind::reliable;

  bool reliable() const { return kind == RoundKind::reliable; }
  bool unreliable() const { return kind != RoundKind::reliable; }
  auto operator<=>(const StateLabel&) const = default;
};

// U(e,r), F(e,r) for the first unreliable round after a reliable one, R(e,r).
std::string to_string(const StateLabel& l);

enum class Transition : std::uint8_t { uu, rf, ur, fr, rr, sk };
inline constexpr Transition kAllTransitions[] = {Transition::uu, Transition::rf, Transition::ur,
                                                 Transition::fr, Transition::rr, Transition::sk};
std::string to_string(Transition t);

StateLabel apply_transition(const StateLabel& l, Transition t);

enum class MsgType : std::uint8_t { unreliable, reliable };

struct MessageId {
  ServerId source = 0;
  std::uint64_t epoch = 0;
  std::uint64_t round = 0;
  MsgType type = MsgType::unreliable;
  auto operator<=>(const MessageId&) const = default;
};

using Bytes = std::string;

struct Message {
  MessageId id;
  std::shared_ptr<const Bytes> payload;
  std::uint64_t digest = 0;  // hash of the payload bytes, computed once

  std::size_t size() const { return payload ? payload->size() : 0; }
};

Message make_message(const MessageId& id, std::shared_ptr<const Bytes> payload);
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 1469598103934665603ULL);

// target == kEonRequest asks every server to run a reliable round so a staged
// eon transition can take place; it is not a failure.
inline constexpr ServerId kEonRequest = -1;

struct FailureNotification {
  ServerId target = 0;
  ServerId owner = 0;
  std::uint64_t eon = 1;
  auto operator<=>(const FailureNotification&) const = default;
};

enum class ProbeDir : std::uint8_t { forward, backward };

struct Probe {
  ServerId source = 0;
  std::uint64_t epoch = 0;
  std::uint64_t round = 0;
  ProbeDir dir = ProbeDir::forward;
};

enum class PacketKind : std::uint8_t { bcast, rbcast, fail, probe };

struct Packet {
  PacketKind kind = PacketKind::bcast;
  Message msg;
  FailureNotification fn;
  Probe probe;
  std::uint64_t eon = 1;

  std::size_t wire_size() const;
};

enum class Channel : std::uint8_t { unreliable, reliable, fd };
std::string to_string(Channel c);

struct SendEffect {
  Packet packet;
  std::vector<ServerId> to;
  Channel channel = Channel::reliable;
};
struct BroadcastEffect {
  Message msg;
};
struct DeliverEffect {
  std::uint64_t epoch = 0;
  std::uint64_t round = 0;
  bool reliable = false;
  std::vector<Message> messages;
};
struct RemoveEffect {
  std::vector<ServerId> servers;
};
struct TransitionEffect {
  StateLabel from, to;
  Transition kind;
};
struct SelfTerminateEffect {
  std::string reason;
};
struct EonEffect {
  std::uint64_t eon = 1;  // eon in effect after this event
  bool switched = false;  // false: entered the transitional round
};

using Effect = std::variant<SendEffect, BroadcastEffect, DeliverEffect, RemoveEffect, TransitionEffect,
                            SelfTerminateEffect, EonEffect>;
using Effects = std::vector<Effect>;

using Notification = std::pair<ServerId, ServerId>;  // (target, owner)
using NotificationSet = std::set<Notification>;
using MessageSet = std::map<MessageId, Message>;

struct TrackingDigraph {
  ServerId root = 0;
  Digraph g;

  static TrackingDigraph fresh(ServerId root) { return {root, Digraph({root})}; }
  bool finished() const { return g.empty(); }
};

using TrackingObserver = std::function<void(const Notification&, const TrackingDigraph&)>;

// Applies f_new (in order) to g given the already known f_old. The observer, if any,
// sees g after the expansion/edge-removal step and again after the final prune.
TrackingDigraph update_tracking_digraph(TrackingDigraph g, const NotificationSet& f_old,
                                        const std::vector<Notification>& f_new, const Digraph& gr,
                                        const TrackingObserver& observer = {});
void update_tracking_digraph_in_place(TrackingDigraph& g, const NotificationSet& f_old,
                                      const std::vector<Notification>& f_new, const Digraph& gr,
                                      const TrackingObserver& observer = {});

std::vector<Message> deterministic_delivery_order(const MessageSet& m);

struct ServerConfig {
  int f = 0;
  bool uniform = false;
  bool partition = false;
  // Never use unreliable rounds: every round is reliable.
  bool reliable_only = false;
  // Reruns broadcast a fresh payload instead of the original one.
  bool relax_rerun_identity = false;
  // Own messages for rounds up to this bound are sent eagerly; later ones only
  // once a message of the round arrives.
  std::uint64_t eager_until_round = std::numeric_limits<std::uint64_t>::max();
  std::size_t payload_size = 0;
  bool keep_log = true;
};

struct PendingDelivery {
  DeliverEffect round;
  bool released = false;
  bool uniform_gated = false;
  bool partition_gated = false;
  std::size_t membership = 0;  // |V(G_R)| the gated round ran with
};

struct ServerState {
  ServerId id = 0;
  ServerConfig config;
  StateLabel label;

  std::shared_ptr<const Dissemination> gu;
  Digraph gr;

  MessageSet M, M_prev, M_next;
  NotificationSet F;
  std::map<ServerId, TrackingDigraph> tracking;
  std::size_t tracking_busy = 0;  // tracking digraphs that are not finished

  std::uint64_t last_delivered = 0;
  std::vector<DeliverEffect> delivered;  // filled when config.keep_log
  std::map<std::uint64_t, std::shared_ptr<const Bytes>> own_payloads;
  std::deque<PendingDelivery> pending;

  std::map<std::pair<std::uint64_t, std::uint64_t>, PartitionProbe> probes;
  EonState eon;
  std::vector<std::pair<Packet, ServerId>> postponed;  // next-eon traffic
  std::set<ServerId> local_suspects;
  bool terminated = false;
};

// Creates the state in R(1,0) and applies the initial transition to F(1,1).
ServerState init_server(ServerId id, int n, const DigraphSpec& unreliable, const DigraphSpec& reliable,
                        const ServerConfig& config);
// Same with prebuilt overlays; kappa_gr < 0 means compute it.
ServerState init_server(ServerId id, std::shared_ptr<const Dissemination> gu, Digraph gr,
                        const ServerConfig& config, int kappa_gr = -1);

// Emits the initial transition record and the first own broadcast.
Effects start_server(ServerState& s);

// Full packet entry point: eon filtering, dispatch, main-loop step, delivery drain.
Effects receive_packet(ServerState& s, const Packet& p, ServerId from);
// Local failure detector suspects `target` (a predecessor in the current reliable digraph).
Effects local_suspicion(ServerState& s, ServerId target, std::uint64_t eon);
Effects self_terminate(ServerState& s, const std::string& reason);
// R-broadcasts an eon request from this server and handles it locally.
Effects request_eon_transition(ServerState& s);

// The individual handlers. They append to `out` and do not drain gated deliveries.
void a_broadcast_own(ServerState& s, Effects& out);
void handle_unreliable_msg(ServerState& s, const Message& m, Effects& out);
void handle_reliable_msg(ServerState& s, const Message& m, Effects& out);
void handle_failure_notification(ServerState& s, const FailureNotification& fn, Effects& out);
void try_to_complete(ServerState& s, Effects& out);
void handle_probe(ServerState& s, const Probe& p, ServerId from, Effects& out);
// Releases gated deliveries whose gate opened, in order.
void drain_deliveries(ServerState& s, Effects& out);

Message own_message(ServerState& s);
bool is_eager(const ServerState& s);

}  // namespace dualcast
