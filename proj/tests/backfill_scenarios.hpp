#pragma once

#include <map>
#include <string>
#include <vector>

#include "qwait/simworld.hpp"

namespace qwait::testing {

struct BackfillScenario {
  std::string name;
  int capacity;
  std::vector<SimJob> jobs;  // {id, submit, nodes, req_wtime, actual}
  std::map<std::string, Instant> expected_start;
};

// Start times worked out by hand from the conservative backfill rules.
inline std::vector<BackfillScenario> backfill_scenarios() {
  return {
      {"single job", 4, {{"A", 0, 2, 100, 50}}, {{"A", 0}}},
      {"full machine is fcfs", 4, {{"A", 0, 4, 100, 100}, {"B", 10, 4, 100, 100}}, {{"A", 0}, {"B", 100}}},
      {"small job backfills ahead of blocked wide job",
       8,
       {{"A", 0, 6, 100, 100}, {"B", 1, 8, 50, 50}, {"C", 2, 2, 90, 90}},
       {{"A", 0}, {"B", 100}, {"C", 2}}},
      {"backfill refused when it would delay the reservation",
       8,
       {{"A", 0, 6, 100, 100}, {"B", 1, 8, 50, 50}, {"C", 2, 2, 120, 120}},
       {{"A", 0}, {"B", 100}, {"C", 150}}},
      {"early finish pulls the next job forward", 4, {{"A", 0, 4, 100, 30}, {"B", 5, 4, 50, 50}}, {{"A", 0}, {"B", 30}}},
      {"several backfills around one reservation",
       8,
       {{"A", 0, 4, 100, 100}, {"B", 1, 8, 10, 10}, {"C", 2, 2, 50, 50}, {"D", 3, 2, 97, 97}, {"E", 4, 1, 10, 10}},
       {{"A", 0}, {"B", 100}, {"C", 2}, {"D", 3}, {"E", 52}}},
      {"equal submit times order by id", 2, {{"B", 0, 2, 10, 10}, {"A", 0, 2, 10, 10}}, {{"A", 0}, {"B", 10}}},
      {"finish is applied before a submit at the same instant",
       2,
       {{"A", 0, 2, 10, 10}, {"B", 10, 2, 5, 5}},
       {{"A", 0}, {"B", 10}}},
      {"zero runtime job frees its nodes at once", 1, {{"A", 0, 1, 60, 0}, {"B", 0, 1, 60, 60}}, {{"A", 0}, {"B", 0}}},
      {"early finish lets a small job pass a wide one",
       8,
       {{"A", 0, 8, 100, 40}, {"B", 1, 4, 100, 100}, {"C", 2, 8, 50, 50}, {"D", 3, 4, 30, 30}},
       {{"A", 0}, {"B", 40}, {"C", 140}, {"D", 40}}},
  };
}

}  // namespace qwait::testing
