#include "seemore/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace seemore {

std::string RunMetrics::to_csv() const {
  std::ostringstream os;
  os << "request_id,client,ts,mode,view,latency_sim_ms\n";
  for (const RequestSample& r : requests)
    os << r.request_id << ',' << r.client << ',' << r.ts << ','
       << mode_name(r.mode) << ',' << r.view << ',' << r.latency() << '\n';
  os << "\nmsg_type,mode,count\n";
  for (const auto& [key, n] : message_counts)
    os << msg_type_name(MsgType(key.first)) << ','
       << mode_name(Mode(key.second)) << ',' << n << '\n';
  os << "\nview,start,end,downtime\n";
  for (const ViewChangeSpan& v : view_changes)
    os << v.view << ',' << v.start << ',' << (v.installed ? v.end : 0) << ','
       << v.downtime() << '\n';
  return os.str();
}

bool RunMetrics::emit_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) return false;
  f << to_csv();
  return bool(f);
}

LinearFit linear_fit(const std::vector<std::pair<double, double>>& pts) {
  LinearFit fit;
  const size_t n = pts.size();
  if (n < 2) return fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = n * sxx - sx * sx;
  if (denom == 0) return fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0, mean = sy / n;
  for (auto [x, y] : pts) {
    double e = y - (fit.slope * x + fit.intercept);
    ss_res += e * e;
    ss_tot += (y - mean) * (y - mean);
  }
  fit.r2 = ss_tot == 0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

}  // namespace seemore
