#pragma once

#include <map>
#include <string>
#include <vector>

#include "seemore/messages.hpp"
#include "seemore/types.hpp"

namespace seemore {

struct RequestSample {
  uint64_t request_id = 0;
  ClientId client = 0;
  uint64_t ts = 0;
  Mode mode = Mode::Lion;
  View view = 0;
  SimTime submitted_at = 0;
  SimTime completed_at = 0;
  SimTime latency() const { return completed_at - submitted_at; }
};

struct ViewChangeSpan {
  View view = 0;        // the view being installed
  SimTime start = 0;    // first replica gave up on the old view
  SimTime end = 0;      // first replica installed the new view
  bool installed = false;
  SimTime downtime() const { return installed ? end - start : 0; }
};

struct RunMetrics {
  std::vector<RequestSample> requests;
  // counters keyed by (message type, sender's mode)
  std::map<std::pair<uint8_t, uint8_t>, uint64_t> message_counts;
  uint64_t total_messages = 0;
  std::vector<ViewChangeSpan> view_changes;
  SimTime duration = 0;

  void count_message(MsgType t, Mode m) {
    message_counts[{uint8_t(t), uint8_t(m)}]++;
    total_messages++;
  }
  double throughput() const {
    return duration == 0 ? 0.0
                         : double(requests.size()) / double(duration);
  }
  // Three stable-order tables: latencies, message counters, view-change
  // downtimes. Deterministic byte-for-byte for a fixed run.
  std::string to_csv() const;
  bool emit_csv(const std::string& path) const;
};

// Least-squares y = slope*x + intercept with the coefficient of
// determination; used to check message-count scaling trends.
struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};
LinearFit linear_fit(const std::vector<std::pair<double, double>>& pts);

}  // namespace seemore
