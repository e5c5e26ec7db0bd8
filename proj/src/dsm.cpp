#include "satsweep/dsm.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "satsweep/geometry.h"

namespace satsweep {

bool Dsm::cell_of(double e, double n, int& r, int& c) const {
  const double fc = std::floor((e - xll) / cell);
  const double fr = std::floor((n - yll) / cell);
  if (fc < 0 || fr < 0 || fc >= cols || fr >= rows) return false;
  c = static_cast<int>(fc);
  r = rows - 1 - static_cast<int>(fr);
  return true;
}

DsmMetrics evaluate_dsm(const Dsm& est, const Dsm& gt) {
  if (est.zone != 0 && gt.zone != 0 && (est.zone != gt.zone || est.south != gt.south))
    throw Error("evaluate_dsm: grids are in different UTM zones");

  double sum_abs = 0.0, sum_sq = 0.0;
  long long both = 0, below25 = 0, below75 = 0, gt_valid = 0;
  for (int r = 0; r < gt.rows; ++r)
    for (int c = 0; c < gt.cols; ++c) {
      const double g = gt.at(r, c);
      if (gt.is_nodata(g)) continue;
      ++gt_valid;
      // nearest-cell alignment onto the ground-truth grid
      int er, ec;
      if (!est.cell_of(gt.center_e(c), gt.center_n(r), er, ec)) continue;
      const double v = est.at(er, ec);
      if (est.is_nodata(v)) continue;
      const double d = std::fabs(v - g);
      sum_abs += d;
      sum_sq += d * d;
      ++both;
      if (d < 2.5) ++below25;
      if (d < 7.5) ++below75;
    }
  if (both == 0) throw Error("evaluate_dsm: no overlapping valid cells");

  DsmMetrics m;
  m.mae = sum_abs / both;
  m.rmse = std::sqrt(sum_sq / both);
  m.pct_below_2_5 = 100.0 * below25 / both;
  m.pct_below_7_5 = 100.0 * below75 / both;
  m.completeness = gt_valid > 0 ? 100.0 * both / gt_valid : 0.0;
  return m;
}

Dsm read_esri_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open grid: " + path);
  Dsm d;
  d.nodata = -9999.0;
  long long expected = -1;
  std::string key;
  // 6 header lines, keys case-insensitive
  for (int i = 0; i < 6; ++i) {
    double value;
    if (!(in >> key >> value)) throw Error("grid: bad header in " + path);
    for (char& ch : key) ch = static_cast<char>(std::tolower(ch));
    if (key == "ncols") d.cols = static_cast<int>(value);
    else if (key == "nrows") d.rows = static_cast<int>(value);
    else if (key == "xllcorner") d.xll = value;
    else if (key == "yllcorner") d.yll = value;
    else if (key == "cellsize") d.cell = value;
    else if (key == "nodata_value") d.nodata = value;
    else throw Error("grid: unknown header key '" + key + "' in " + path);
  }
  if (d.cols <= 0 || d.rows <= 0 || d.cell <= 0)
    throw Error("grid: bad dimensions in " + path);
  expected = static_cast<long long>(d.cols) * d.rows;
  d.values.resize(expected);
  for (long long i = 0; i < expected; ++i)
    if (!(in >> d.values[i])) throw Error("grid: truncated values in " + path);

  // sidecar with the UTM zone, optional
  std::ifstream side(path + ".json");
  if (side) {
    nlohmann::json j;
    side >> j;
    d.zone = j.value("utm_zone", 0);
    d.south = j.value("south", false);
  }
  return d;
}

void write_esri_grid(const Dsm& dsm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write grid: " + path);
  char buf[64];
  out << "ncols " << dsm.cols << "\n";
  out << "nrows " << dsm.rows << "\n";
  std::snprintf(buf, sizeof(buf), "%.6f", dsm.xll);
  out << "xllcorner " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6f", dsm.yll);
  out << "yllcorner " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.6f", dsm.cell);
  out << "cellsize " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%g", dsm.nodata);
  out << "NODATA_value " << buf << "\n";
  for (int r = 0; r < dsm.rows; ++r) {
    for (int c = 0; c < dsm.cols; ++c) {
      const double v = dsm.at(r, c);
      if (dsm.is_nodata(v))
        std::snprintf(buf, sizeof(buf), "%g", dsm.nodata);
      else
        std::snprintf(buf, sizeof(buf), "%.4f", v);
      out << buf << (c + 1 == dsm.cols ? "" : " ");
    }
    out << "\n";
  }
  if (!out) throw Error("grid: write failed for " + path);

  nlohmann::json j;
  j["utm_zone"] = dsm.zone;
  j["south"] = dsm.south;
  std::ofstream side(path + ".json");
  side << j.dump(2) << "\n";
}

std::string metrics_to_json(const DsmMetrics& m, double runtime_seconds) {
  nlohmann::json j;
  j["mae_m"] = m.mae;
  j["rmse_m"] = m.rmse;
  j["pct_below_2_5m"] = m.pct_below_2_5;
  j["pct_below_7_5m"] = m.pct_below_7_5;
  j["completeness_pct"] = m.completeness;
  j["runtime_seconds"] = runtime_seconds;
  return j.dump(2) + "\n";
}

}  // namespace satsweep
