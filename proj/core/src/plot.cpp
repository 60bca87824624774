#include "emix/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "emix/trainer.hpp"

namespace emix {

namespace {

struct Series {
  // step -> values across files
  std::map<long, std::vector<double>> points;
};

double field(const MetricsRow& r, int idx) {
  switch (idx) {
    case 0: return r.eval_return;
    case 1: return r.eval_success;
    case 2: return r.critic_loss;
    case 3: return r.bhat_term;
    case 4: return r.mean_k;
    case 5: return r.mean_gbar;
    case 6: return r.gate_open_frac;
    case 7: return r.actor_grad_norm;
    case 8: return r.critic_grad_norm;
    default: return r.wall_clock;
  }
}

const char* kFieldNames[] = {"eval_return",    "eval_success",   "critic_loss",
                             "bhat_term",      "mean_k",         "mean_gbar",
                             "gate_open_frac", "actor_grad_norm", "critic_grad_norm",
                             "wall_clock"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_svg(const std::string& path, const std::string& title, const Series& s) {
  const double w = 640, h = 400, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& [step, vals] : s.points) {
    xmin = std::min(xmin, static_cast<double>(step));
    xmax = std::max(xmax, static_cast<double>(step));
    for (double v : vals) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) {
    ymax = ymin + 1.0;
    ymin -= 1.0;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

  std::string band_top, band_bot, mean_line;
  for (const auto& [step, vals] : s.points) {
    double lo = vals[0], hi = vals[0], mean = 0.0;
    for (double v : vals) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      mean += v;
    }
    mean /= static_cast<double>(vals.size());
    const std::string x = num(px(step));
    band_top += x + "," + num(py(hi)) + " ";
    band_bot = x + "," + num(py(lo)) + " " + band_bot;
    mean_line += x + "," + num(py(mean)) + " ";
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_plots: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
         "font-family=\"sans-serif\">" << title << "</text>\n"
      << "<polygon points=\"" << band_top << band_bot
      << "\" fill=\"#8cb4e8\" fill-opacity=\"0.35\" stroke=\"none\"/>\n"
      << "<polyline points=\"" << mean_line
      << "\" fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"1.5\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << h - mb << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << ml << "\" y=\"" << h - mb + 18
      << "\" font-size=\"11\" font-family=\"sans-serif\">" << num(xmin) << "</text>\n"
      << "<text x=\"" << w - mr << "\" y=\"" << h - mb + 18
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << num(xmax)
      << "</text>\n"
      << "<text x=\"" << ml - 6 << "\" y=\"" << h - mb
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << num(ymin)
      << "</text>\n"
      << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4
      << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << num(ymax)
      << "</text>\n"
      << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">step"
      << "</text>\n"
      << "</svg>\n";
}

}  // namespace

std::vector<std::string> emit_plots(const std::vector<std::string>& metrics_files,
                                    const std::string& out_dir) {
  if (metrics_files.empty()) throw std::invalid_argument("emit_plots: no metrics files");
  std::vector<std::vector<MetricsRow>> runs;
  for (const std::string& f : metrics_files) runs.push_back(parse_metrics_csv(f));
  std::filesystem::create_directories(out_dir);

  std::vector<std::string> written;
  for (int idx = 0; idx < 10; ++idx) {
    Series s;
    for (const auto& rows : runs)
      for (const MetricsRow& r : rows) {
        const double v = field(r, idx);
        if (std::isfinite(v)) s.points[r.step].push_back(v);
      }
    if (s.points.empty()) {
      std::fprintf(stderr, "emit_plots: no data for column %s, skipping\n",
                   kFieldNames[idx]);
      continue;
    }
    const std::string path = out_dir + "/" + kFieldNames[idx] + ".svg";
    write_svg(path, kFieldNames[idx], s);
    written.push_back(path);
  }
  return written;
}

}  // namespace emix
