#pragma once

// Mobility-style data: a synthetic event-log generator driven by a planted
// time-homogeneous Markov chain, ingestion of event logs into weighted
// fixed-length segments, and the tied chain model fitted to them.
//
// Location states are coded 0 = null (not observed), 1..L = location ids.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpgm/model.hpp"
#include "dpgm/naive.hpp"

namespace dpgm {

struct MobilityConfig {
  int num_users = 10000;
  int days_per_user = 1;
  int num_locations = 20;
  double initial_presence = 0.3;  // P(observed) in the first slot of a day
  double arrive = 0.08;           // null -> some location
  double leave = 0.04;            // location -> null
  double stay = 0.75;             // location -> same location, given still present
  std::uint64_t seed = 1;

  void validate() const;
};

// Transition matrix over L + 1 states, row-major, rows sum to 1.
struct MobilityChain {
  int num_locations = 0;
  std::vector<double> initial;
  std::vector<double> transition;

  int states() const { return num_locations + 1; }
  double operator()(int from, int to) const {
    return transition[static_cast<std::size_t>(from * states() + to)];
  }
};

MobilityChain planted_chain(const MobilityConfig& cfg);

struct MobilityEvent {
  std::string user_id;
  int day = 0;
  int timestamp = 0;  // minutes after midnight, [0, 1440)
  int location_id = 0;
};

// One event per observed 10-minute slot, sorted by user, day and time.
std::vector<MobilityEvent> generate_mobility(const MobilityConfig& cfg, const MobilityChain& chain);

void write_events_csv(const std::filesystem::path& path, const std::vector<MobilityEvent>& events);

struct EventLog {
  std::vector<MobilityEvent> events;
  std::size_t malformed_rows = 0;
};

// Columns user_id,day,timestamp,location_id. Rows with missing or
// non-integer fields, a timestamp outside the day or a location outside
// [0, num_locations] are skipped and counted.
EventLog read_events_csv(const std::filesystem::path& path, int num_locations);

struct MobilityData {
  Dataset data{0};
  std::vector<int> individual;          // per record, index into user_ids
  std::vector<std::string> user_ids;    // sorted
  int num_locations = 0;
  int segment_length = 0;
  std::size_t malformed_rows = 0;
  std::size_t contributing_individuals = 0;
};

// Each user-day becomes a sequence of slots holding the last location seen
// in the slot (null if none), cut into segments of segment_hours. Segments
// that are entirely null are dropped; the K remaining segments of a user get
// weight 1/K each, so every user adds total mass 1 to every table.
MobilityData mobility_ingest(const std::vector<MobilityEvent>& events, int num_locations,
                             int interval_minutes = 10, int segment_hours = 1);

// Cliques {0}, {0,1}, ..., {T-2,T-1}.
StructurePtr time_homogeneous_structure(int length, int states);
// The node clique in one group and all edges in another.
ParameterTying time_homogeneous_tying(const ModelStructure& structure);

// Largest L1 change in any single table caused by removing one individual.
double max_individual_contribution(const MobilityData& data, const StructurePtr& structure);

}  // namespace dpgm
