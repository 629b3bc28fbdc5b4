#pragma once

#include "cm4fq/metrics.hpp"
#include "cm4fq/sim.hpp"

#include <iosfwd>
#include <string>

namespace cm4fq {

Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text);
std::string serialize_scenario(const Scenario& scenario);

// Name <-> index helpers; names fall back to u<i>/s<k> when absent.
std::string user_name(const Scenario& sc, int user);
std::string server_name(const Scenario& sc, int server);
int user_index(const Scenario& sc, const std::string& name);

void write_trace_csv(std::ostream& out, const Scenario& sc, const Trace& trace);
void write_reports_csv(std::ostream& out, const Scenario& sc, const std::vector<BoundReport>& reports);
void write_summary(std::ostream& out, const Scenario& sc, const Trace& trace);

}  // namespace cm4fq
