#include "dualcast/trace.hpp"

#include <ostream>
#include <sstream>

namespace dualcast {

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::broadcast: return "broadcast";
    case EventKind::send: return "send";
    case EventKind::receive: return "receive";
    case EventKind::deliver: return "deliver";
    case EventKind::transition: return "transition";
    case EventKind::remove: return "remove";
    case EventKind::crash: return "crash";
    case EventKind::terminate: return "terminate";
    case EventKind::suspect: return "suspect";
    case EventKind::trap: return "trap";
    case EventKind::eon_enter: return "eon_enter";
    case EventKind::eon_switch: return "eon_switch";
    case EventKind::eon_first_send: return "eon_first_send";
    case EventKind::suppressed: return "suppressed";
  }
  return "?";
}

std::uint64_t round_digest(const std::vector<Message>& ordered) {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const auto& m : ordered) {
    h = fnv1a(&m.id.source, sizeof(m.id.source), h);
    h = fnv1a(&m.digest, sizeof(m.digest), h);
  }
  return h;
}

namespace {

const char* packet_name(PacketKind k) {
  switch (k) {
    case PacketKind::bcast: return "bcast";
    case PacketKind::rbcast: return "rbcast";
    case PacketKind::fail: return "fail";
    case PacketKind::probe: return "probe";
  }
  return "?";
}

bool has_message(EventKind k) {
  return k == EventKind::broadcast || k == EventKind::send || k == EventKind::receive || k == EventKind::suppressed;
}

}  // namespace

// Columns: time server event peer label detail
void Trace::write_tsv(std::ostream& out) const {
  out << "time\tserver\tevent\tpeer\tlabel\tdetail\n";
  for (const auto& e : events) {
    out << e.time << '\t' << e.server << '\t' << to_string(e.kind) << '\t' << e.peer << '\t' << to_string(e.label)
        << '\t';
    switch (e.kind) {
      case EventKind::transition:
        out << to_string(e.transition) << "->" << to_string(e.label_to);
        break;
      case EventKind::deliver:
      case EventKind::remove:
      case EventKind::eon_enter:
      case EventKind::eon_switch:
      case EventKind::eon_first_send:
        out << e.value;
        break;
      default:
        if (has_message(e.kind)) {
          out << packet_name(e.packet) << ' ' << to_string(e.channel);
          if (e.packet == PacketKind::bcast || e.packet == PacketKind::rbcast)
            out << ' ' << e.msg.source << '/' << e.msg.epoch << '/' << e.msg.round;
        }
    }
    if (!e.note.empty()) out << (e.kind == EventKind::remove || e.kind == EventKind::deliver ? " " : "") << e.note;
    out << '\n';
  }
}

std::uint64_t Trace::hash() const {
  std::ostringstream o;
  write_tsv(o);
  for (std::size_t s = 0; s < logs.size(); ++s)
    for (const auto& d : logs[s]) o << s << ' ' << d.epoch << ' ' << d.round << ' ' << d.time << ' ' << d.digest << '\n';
  const std::string text = o.str();
  return fnv1a(text.data(), text.size());
}

}  // namespace dualcast
