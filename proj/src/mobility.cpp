#include "dpgm/mobility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dpgm/random.hpp"

namespace dpgm {

void MobilityConfig::validate() const {
  if (num_users <= 0 || days_per_user <= 0) throw DomainError("mobility: need at least one user-day");
  if (num_locations < 1) throw DomainError("mobility: need at least one location");
  for (double p : {initial_presence, arrive, leave, stay})
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("mobility: probabilities must lie in [0, 1]");
}

MobilityChain planted_chain(const MobilityConfig& cfg) {
  cfg.validate();
  const int L = cfg.num_locations, S = L + 1;
  Rng rng(derive_seed(cfg.seed, {0}));
  MobilityChain chain{L, std::vector<double>(static_cast<std::size_t>(S)),
                      std::vector<double>(static_cast<std::size_t>(S * S), 0.0)};
  const auto popularity = rng.flat_dirichlet(static_cast<std::size_t>(L));
  chain.initial[0] = 1.0 - cfg.initial_presence;
  chain.transition[0] = 1.0 - cfg.arrive;
  for (int l = 1; l <= L; ++l) {
    chain.initial[static_cast<std::size_t>(l)] = cfg.initial_presence * popularity[static_cast<std::size_t>(l - 1)];
    chain.transition[static_cast<std::size_t>(l)] = cfg.arrive * popularity[static_cast<std::size_t>(l - 1)];
  }
  for (int from = 1; from <= L; ++from) {
    double* row = &chain.transition[static_cast<std::size_t>(from * S)];
    row[0] = cfg.leave;
    const auto moves = rng.flat_dirichlet(static_cast<std::size_t>(L > 1 ? L - 1 : 1));
    const double present = 1.0 - cfg.leave;
    if (L == 1) {
      row[1] = present;
      continue;
    }
    row[from] = present * cfg.stay;
    for (int to = 1, k = 0; to <= L; ++to)
      if (to != from) row[to] = present * (1.0 - cfg.stay) * moves[static_cast<std::size_t>(k++)];
  }
  return chain;
}

namespace {

constexpr int kMinutesPerDay = 1440;

std::string user_name(int u) {
  std::string digits = std::to_string(u);
  return "u" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

}  // namespace

std::vector<MobilityEvent> generate_mobility(const MobilityConfig& cfg, const MobilityChain& chain) {
  cfg.validate();
  const int S = chain.states();
  constexpr int slots = kMinutesPerDay / 10;
  std::vector<MobilityEvent> events;
  for (int u = 0; u < cfg.num_users; ++u) {
    Rng rng(derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(u)}));
    const std::string id = user_name(u);
    for (int day = 0; day < cfg.days_per_user; ++day) {
      int state = static_cast<int>(rng.categorical(chain.initial));
      for (int s = 0; s < slots; ++s) {
        if (s > 0) {
          const std::span<const double> row(&chain.transition[static_cast<std::size_t>(state * S)],
                                            static_cast<std::size_t>(S));
          state = static_cast<int>(rng.categorical(row));
        }
        const int minute = s * 10 + static_cast<int>(rng.below(10));
        if (state != 0) events.push_back({id, day, minute, state});
      }
    }
  }
  return events;
}

void write_events_csv(const std::filesystem::path& path, const std::vector<MobilityEvent>& events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "user_id,day,timestamp,location_id\n";
  for (const auto& e : events) out << e.user_id << ',' << e.day << ',' << e.timestamp << ',' << e.location_id << '\n';
}

namespace {

bool parse_int(const std::string& s, int& v) {
  if (s.empty()) return false;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

}  // namespace

EventLog read_events_csv(const std::filesystem::path& path, int num_locations) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  EventLog log;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      first = false;
      if (line.rfind("user_id", 0) == 0) continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    MobilityEvent e;
    if (f.size() != 4 || f[0].empty() || !parse_int(f[1], e.day) || !parse_int(f[2], e.timestamp) ||
        !parse_int(f[3], e.location_id) || e.day < 0 || e.timestamp < 0 || e.timestamp >= kMinutesPerDay ||
        e.location_id < 0 || e.location_id > num_locations) {
      ++log.malformed_rows;
      continue;
    }
    e.user_id = f[0];
    log.events.push_back(std::move(e));
  }
  return log;
}

MobilityData mobility_ingest(const std::vector<MobilityEvent>& events, int num_locations, int interval_minutes,
                             int segment_hours) {
  if (num_locations < 1) throw DomainError("ingest: need at least one location");
  if (interval_minutes <= 0 || 60 % interval_minutes != 0) throw DomainError("ingest: interval must divide an hour");
  if (segment_hours <= 0 || 24 % segment_hours != 0) throw DomainError("ingest: segment length must divide a day");
  const int slots = kMinutesPerDay / interval_minutes;
  const int seg_len = segment_hours * 60 / interval_minutes;

  // user -> day -> (slot -> (timestamp, location)) keeping the latest event.
  std::map<std::string, std::map<int, std::vector<std::pair<int, int>>>> days;
  for (const auto& e : events) {
    if (e.location_id < 0 || e.location_id > num_locations || e.timestamp < 0 || e.timestamp >= kMinutesPerDay)
      throw DomainError("ingest: event outside the documented ranges");
    auto& seq = days[e.user_id][e.day];
    if (seq.empty()) seq.assign(static_cast<std::size_t>(slots), {-1, 0});
    auto& slot = seq[static_cast<std::size_t>(e.timestamp / interval_minutes)];
    if (e.timestamp >= slot.first) slot = {e.timestamp, e.location_id};
  }

  MobilityData out;
  out.num_locations = num_locations;
  out.segment_length = seg_len;
  out.data = Dataset(static_cast<std::size_t>(seg_len));
  std::vector<int> rec(static_cast<std::size_t>(seg_len));
  for (const auto& [user, per_day] : days) {
    std::vector<std::vector<int>> segments;
    for (const auto& [day, seq] : per_day) {
      for (int start = 0; start < slots; start += seg_len) {
        bool any = false;
        for (int k = 0; k < seg_len; ++k) {
          rec[static_cast<std::size_t>(k)] = seq[static_cast<std::size_t>(start + k)].second;
          any = any || rec[static_cast<std::size_t>(k)] != 0;
        }
        if (any) segments.push_back(rec);
      }
    }
    out.user_ids.push_back(user);
    if (segments.empty()) continue;
    ++out.contributing_individuals;
    const double w = 1.0 / static_cast<double>(segments.size());
    for (const auto& s : segments) {
      out.data.add(s, w);
      out.individual.push_back(static_cast<int>(out.user_ids.size() - 1));
    }
  }
  return out;
}

StructurePtr time_homogeneous_structure(int length, int states) {
  if (length < 2) throw DomainError("time-homogeneous chain needs at least two steps");
  std::vector<Scope> cliques{{0}};
  for (int t = 0; t + 1 < length; ++t) cliques.push_back({t, t + 1});
  return make_structure(DomainSpec::uniform(static_cast<std::size_t>(length), states), std::move(cliques));
}

ParameterTying time_homogeneous_tying(const ModelStructure& structure) {
  ParameterTying t;
  for (const Scope& c : structure.cliques()) t.group_of.push_back(c.size() == 1 ? 0 : 1);
  t.validate(structure);
  return t;
}

double max_individual_contribution(const MobilityData& data, const StructurePtr& structure) {
  const ModelStructure& st = *structure;
  std::vector<std::vector<double>> per(data.user_ids.size());
  for (std::size_t i = 0; i < data.data.size(); ++i) {
    auto& t = per[static_cast<std::size_t>(data.individual[i])];
    if (t.empty()) t.assign(st.dimension(), 0.0);
    for (std::size_t c = 0; c < st.num_cliques(); ++c)
      t[st.offset(c) + st.record_index(c, data.data.record(i))] += data.data.weight(i);
  }
  double worst = 0.0;
  for (const auto& t : per) {
    if (t.empty()) continue;
    for (std::size_t c = 0; c < st.num_cliques(); ++c) {
      double l1 = 0.0;
      for (std::size_t k = 0; k < st.table_size(c); ++k) l1 += std::fabs(t[st.offset(c) + k]);
      worst = std::max(worst, l1);
    }
  }
  return worst;
}

}  // namespace dpgm
