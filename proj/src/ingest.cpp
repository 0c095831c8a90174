#include "sibling/ingest.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sibling/util.hpp"

namespace sibling {

namespace {

struct SeriesBuilder {
  std::string ip;
  std::vector<TimestampSample> samples;
};

struct CandidateBuilder {
  std::optional<SeriesBuilder> v4;
  std::optional<SeriesBuilder> v6;
};

std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IngestError(IngestErrc::MissingFile, "cannot open " + p.string());
  return in;
}

[[noreturn]] void malformed(const std::filesystem::path& p, std::size_t line, const std::string& why) {
  throw IngestError(IngestErrc::MalformedRecord,
                    "MalformedRecord(" + p.filename().string() + ":" + std::to_string(line) + "): " + why, line);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

LoadedBatch load_batch(const std::filesystem::path& trace_path,
                       const std::filesystem::path& options_path,
                       const std::optional<std::filesystem::path>& labels_path) {
  std::vector<std::string> order;
  std::map<std::string, CandidateBuilder> candidates;
  {
    auto in = open_or_throw(trace_path);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const auto id = j.at("id").get<std::string>();
        const Family fam = parse_family(j.at("family").get<std::string>());
        const auto ip = j.at("ip").get<std::string>();
        const auto tsval = j.at("tsval").get<std::int64_t>();
        const double recv = j.at("recv_time").get<double>();
        if (tsval < 0 || tsval > 0xffffffffLL) malformed(trace_path, n, "tsval out of 32-bit range");
        if (!(recv > 0.0)) malformed(trace_path, n, "recv_time must be positive");
        auto [it, inserted] = candidates.try_emplace(id);
        if (inserted) order.push_back(id);
        auto& slot = fam == Family::V4 ? it->second.v4 : it->second.v6;
        if (!slot) slot = SeriesBuilder{ip, {}};
        if (slot->ip != ip) malformed(trace_path, n, "address changed within series " + id);
        slot->samples.push_back({recv, static_cast<std::uint32_t>(tsval)});
      } catch (const IngestError&) {
        throw;
      } catch (const std::exception& e) {
        malformed(trace_path, n, e.what());
      }
    }
  }

  std::map<std::pair<std::string, Family>, OptionsFingerprint> fingerprints;
  {
    auto in = open_or_throw(options_path);
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        fingerprints[{j.at("id").get<std::string>(), parse_family(j.at("family").get<std::string>())}] =
            OptionsFingerprint(j.at("fingerprint").get<std::string>());
      } catch (const std::exception& e) {
        malformed(options_path, n, e.what());
      }
    }
  }

  struct LabelRow {
    Label label;
    std::string group;
  };
  std::map<std::pair<std::string, std::string>, LabelRow> labels;
  if (labels_path) {
    auto in = open_or_throw(*labels_path);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto cells = split_csv(line);
      if (n == 1) {
        if (cells.size() < 3 || cells[0] != "ip4" || cells[1] != "ip6" || cells[2] != "label") {
          malformed(*labels_path, n, "expected header ip4,ip6,label,group");
        }
        continue;
      }
      if (cells.size() < 3 || cells.size() > 4) malformed(*labels_path, n, "expected 3 or 4 columns");
      Label label;
      try {
        label = parse_label(cells[2]);
      } catch (const std::exception& e) {
        malformed(*labels_path, n, e.what());
      }
      auto key = std::make_pair(cells[0], cells[1]);
      if (labels.count(key)) {
        throw IngestError(IngestErrc::DuplicateLabel, "DuplicateLabel(" + cells[0] + "," + cells[1] + ")", n);
      }
      labels.emplace(std::move(key), LabelRow{label, cells.size() == 4 ? cells[3] : std::string{}});
    }
  }

  LoadedBatch out;
  for (const auto& id : order) {
    auto& c = candidates.at(id);
    if (!c.v4 || !c.v6) {
      out.warnings.push_back("MissingSeries(" + id + ")");
      continue;
    }
    auto fp4 = fingerprints.find({id, Family::V4});
    auto fp6 = fingerprints.find({id, Family::V6});
    if (fp4 == fingerprints.end() || fp6 == fingerprints.end()) {
      out.warnings.push_back("MissingOptions(" + id + ")");
      continue;
    }
    CandidatePair p;
    p.id = id;
    p.ip4 = c.v4->ip;
    p.ip6 = c.v6->ip;
    p.series4 = make_series(c.v4->ip, Family::V4, std::move(c.v4->samples));
    p.series6 = make_series(c.v6->ip, Family::V6, std::move(c.v6->samples));
    p.fp4 = fp4->second;
    p.fp6 = fp6->second;
    if (auto l = labels.find({p.ip4, p.ip6}); l != labels.end()) {
      p.label = l->second.label;
      p.group = l->second.group;
    }
    out.pairs.push_back(std::move(p));
  }
  return out;
}

std::string trace_record(const std::string& id, Family family, const std::string& ip,
                         const TimestampSample& s) {
  char recv[48];
  std::snprintf(recv, sizeof recv, "%.6f", s.recv_time);
  std::string out = "{\"id\":";
  out += nlohmann::json(id).dump();
  out += ",\"family\":\"";
  out += to_string(family);
  out += "\",\"ip\":";
  out += nlohmann::json(ip).dump();
  out += ",\"tsval\":";
  out += std::to_string(s.tsval);
  out += ",\"recv_time\":";
  out += recv;
  out += '}';
  return out;
}

std::string options_record(const std::string& id, Family family, const OptionsFingerprint& fp) {
  return "{\"id\":" + nlohmann::json(id).dump() + ",\"family\":\"" + std::string(to_string(family)) +
         "\",\"fingerprint\":" + nlohmann::json(fp.str()).dump() + "}";
}

void save_batch(std::span<const CandidatePair> pairs, const std::filesystem::path& trace_path,
                const std::filesystem::path& options_path,
                const std::optional<std::filesystem::path>& labels_path) {
  std::string traces, options, labels = "ip4,ip6,label,group\n";
  for (const auto& p : pairs) {
    for (const auto* s : {p.series4.get(), p.series6.get()}) {
      for (const auto& sample : s->samples) {
        traces += trace_record(p.id, s->family, s->ip, sample);
        traces += '\n';
      }
    }
    options += options_record(p.id, Family::V4, p.fp4) + '\n';
    options += options_record(p.id, Family::V6, p.fp6) + '\n';
    if (p.label) {
      labels += p.ip4 + ',' + p.ip6 + ',' + std::string(to_string(*p.label)) + ',' + p.group + '\n';
    }
  }
  write_file_atomic(trace_path, traces);
  write_file_atomic(options_path, options);
  if (labels_path) write_file_atomic(*labels_path, labels);
}

std::vector<std::pair<std::size_t, std::size_t>> nonsibling_index_pairs(std::span<const std::size_t> members) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (members.size() < 2) return out;
  out.reserve(members.size() * (members.size() - 1));
  for (std::size_t a : members) {
    for (std::size_t b : members) {
      if (a != b) out.emplace_back(a, b);
    }
  }
  return out;
}

CandidatePair mix_pair(const CandidatePair& owner6, const CandidatePair& owner4) {
  CandidatePair p;
  p.id = owner6.id + "~" + owner4.id;
  p.ip4 = owner4.ip4;
  p.ip6 = owner6.ip6;
  p.series4 = owner4.series4;
  p.series6 = owner6.series6;
  p.fp4 = owner4.fp4;
  p.fp6 = owner6.fp6;
  p.label = Label::NonSibling;
  p.group = owner6.group == owner4.group ? owner6.group : owner6.group + "/" + owner4.group;
  return p;
}

std::vector<CandidatePair> synthesize_nonsiblings(std::span<const CandidatePair> siblings) {
  std::vector<std::size_t> idx(siblings.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<CandidatePair> out;
  for (auto [i, j] : nonsibling_index_pairs(idx)) out.push_back(mix_pair(siblings[i], siblings[j]));
  return out;
}

}  // namespace sibling
