#include "sdflow/ingest.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "sdflow/error.hpp"
#include "sdflow/io_util.hpp"

namespace sdflow {

const std::string& schema_header(SchemaVersion schema) {
  static const std::string kV1 =
      "flow_id,application,category,location,connection_type,msl,pkt_index,"
      "timestamp_us,direction";
  switch (schema) {
    case SchemaVersion::V1: return kV1;
  }
  return kV1;
}

namespace {

template <typename T>
bool parse_int(std::string_view text, T& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

struct PendingFlow {
  FlowRecord flow;
  std::size_t first_line = 0;
  std::string error;  // first structural problem seen while reading rows
};

}  // namespace

LoadResult read_corpus(std::istream& in, SchemaVersion schema, const std::string& day_tag,
                       std::size_t packet_capture_cap) {
  LoadResult result;
  result.corpus.origin = CorpusOrigin::DatasetFile;
  result.corpus.day_tag = day_tag;

  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kSchemaMismatch, "missing header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != schema_header(schema)) {
    throw Error(ErrorCode::kSchemaMismatch, "header does not match schema v1: " + line);
  }

  std::vector<PendingFlow> pending;
  std::unordered_map<std::string, std::size_t> index_of;
  std::size_t line_no = 1;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 9) {
      result.row_errors.push_back({line_no, fields.empty() ? std::string() : std::string(fields[0]),
                                   "expected 9 fields, got " + std::to_string(fields.size())});
      // Flag the owning flow so it is not returned with a hole in it.
      if (!fields.empty()) {
        auto it = index_of.find(std::string(fields[0]));
        if (it != index_of.end() && pending[it->second].error.empty()) {
          pending[it->second].error = "malformed row at line " + std::to_string(line_no);
        }
      }
      continue;
    }

    const std::string flow_id(fields[0]);
    auto [it, inserted] = index_of.try_emplace(flow_id, pending.size());
    if (inserted) {
      PendingFlow p;
      p.first_line = line_no;
      p.flow.meta.flow_id = flow_id;
      p.flow.meta.application = std::string(fields[1]);
      p.flow.meta.category = std::string(fields[2]);
      p.flow.meta.location = std::string(fields[3]);
      p.flow.meta.connection_type = std::string(fields[4]);
      if (!parse_int(fields[5], p.flow.meta.msl)) p.error = "bad msl '" + std::string(fields[5]) + "'";
      pending.push_back(std::move(p));
    }
    PendingFlow& p = pending[it->second];
    if (!p.error.empty()) continue;

    const auto& meta = p.flow.meta;
    std::uint32_t msl = 0;
    if (fields[1] != meta.application || fields[2] != meta.category ||
        fields[3] != meta.location || fields[4] != meta.connection_type ||
        !parse_int(fields[5], msl) || msl != meta.msl) {
      p.error = "inconsistent flow metadata at line " + std::to_string(line_no);
      continue;
    }
    std::size_t pkt_index = 0;
    if (!parse_int(fields[6], pkt_index) || pkt_index != p.flow.packets.size()) {
      p.error = "bad pkt_index at line " + std::to_string(line_no);
      continue;
    }
    PacketRecord pkt;
    if (!parse_int(fields[7], pkt.timestamp_us)) {
      p.error = "bad timestamp_us at line " + std::to_string(line_no);
      continue;
    }
    if (!parse_direction(std::string(fields[8]), pkt.direction)) {
      p.error = "bad direction at line " + std::to_string(line_no);
      continue;
    }
    p.flow.packets.push_back(pkt);
  }

  for (auto& p : pending) {
    if (!p.error.empty()) {
      result.row_errors.push_back({p.first_line, p.flow.meta.flow_id, p.error});
      continue;
    }
    const auto validation = validate_flow(p.flow, packet_capture_cap);
    if (!validation.ok()) {
      std::string message;
      for (const auto& v : validation.violations) {
        if (!message.empty()) message += "; ";
        message += v;
      }
      result.row_errors.push_back({p.first_line, p.flow.meta.flow_id, message});
      continue;
    }
    result.corpus.flows.push_back(std::move(p.flow));
  }
  return result;
}

LoadResult load_corpus(const std::string& path, SchemaVersion schema, const std::string& day_tag,
                       std::size_t packet_capture_cap) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, "corpus file not found: " + path);
  return read_corpus(in, schema, day_tag, packet_capture_cap);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  auto check = [](const std::string& field) {
    if (field.find_first_of(",\n\r") != std::string::npos) {
      throw Error(ErrorCode::kDataError, "field contains a separator: " + field);
    }
  };
  out << schema_header(SchemaVersion::V1) << '\n';
  for (const auto& flow : corpus.flows) {
    const auto& m = flow.meta;
    check(m.flow_id);
    check(m.application);
    check(m.category);
    check(m.location);
    check(m.connection_type);
    std::string prefix = m.flow_id + ',' + m.application + ',' + m.category + ',' + m.location +
                         ',' + m.connection_type + ',' + std::to_string(m.msl) + ',';
    for (std::size_t i = 0; i < flow.packets.size(); ++i) {
      out << prefix << i << ',' << flow.packets[i].timestamp_us << ','
          << to_string(flow.packets[i].direction) << '\n';
    }
  }
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  AtomicFile file(path);
  write_corpus(corpus, file.stream());
  file.commit();
}

Corpus filter_by_location(const Corpus& corpus, const std::string& location) {
  Corpus out;
  out.origin = corpus.origin;
  out.day_tag = corpus.day_tag;
  for (const auto& flow : corpus.flows) {
    if (flow.meta.location == location) out.flows.push_back(flow);
  }
  return out;
}

}  // namespace sdflow
