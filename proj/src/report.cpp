#include "pielab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "pielab/common.hpp"
#include "pielab/harness.hpp"

namespace pielab::report {

namespace fs = std::filesystem;

Table parse_csv(std::string_view text) {
  Table rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV cell");
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

// "nice" tick step covering a span with about five ticks
double tick_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

std::string format_tick(double v) {
  if (std::abs(v) < 1e-12) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

std::string render_svg(std::string_view title, const std::vector<Panel>& panels, int columns) {
  constexpr double kPanelW = 420, kPanelH = 300, kLeft = 60, kRight = 130, kTop = 36, kBottom = 48, kHeader = 30;
  columns = std::max(1, std::min<int>(columns, static_cast<int>(std::max<std::size_t>(panels.size(), 1))));
  const int rows = static_cast<int>((panels.size() + static_cast<std::size_t>(columns) - 1) / static_cast<std::size_t>(columns));
  const double width = columns * kPanelW;
  const double height = kHeader + std::max(rows, 1) * kPanelH;

  std::string svg = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width) + "\" height=\"" + fixed(height) +
         "\" viewBox=\"0 0 " + fixed(width) + " " + fixed(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fixed(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" + escape_xml(title) +
         "</text>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const double ox = static_cast<double>(p % static_cast<std::size_t>(columns)) * kPanelW;
    const double oy = kHeader + static_cast<double>(p / static_cast<std::size_t>(columns)) * kPanelH;
    const double pw = kPanelW - kLeft - kRight, ph = kPanelH - kTop - kBottom;
    const double x0 = ox + kLeft, y0 = oy + kTop;

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool have_x = false, have_y = false;
    const auto take_x = [&](double x) {
      if (!have_x) xmin = xmax = x;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      have_x = true;
    };
    for (const auto& t : panel.x_ticks) take_x(t.first);
    for (const auto& s : panel.series) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        take_x(s.x[i]);
        if (const auto v = parse_number(s.y[i])) {
          if (!have_y) ymin = ymax = *v;
          ymin = std::min(ymin, *v);
          ymax = std::max(ymax, *v);
          have_y = true;
        }
      }
    }
    if (panel.reference) {
      ymin = std::min(ymin, *panel.reference);
      ymax = std::max(ymax, *panel.reference);
    }
    ymin = std::min(ymin, 0.0);
    if (ymax - ymin < 1e-9) ymax = ymin + 1.0;
    const double step = tick_step(ymax - ymin);
    ymin = std::floor(ymin / step) * step;
    ymax = std::ceil(ymax / step) * step;
    if (xmax - xmin < 1e-12) {
      xmin -= 0.5;
      xmax += 0.5;
    } else {
      const double pad = 0.05 * (xmax - xmin);
      xmin -= pad;
      xmax += pad;
    }
    const auto sx = [&](double x) { return x0 + (x - xmin) / (xmax - xmin) * pw; };
    const auto sy = [&](double y) { return y0 + ph - (y - ymin) / (ymax - ymin) * ph; };

    svg += "<g class=\"panel\">\n";
    svg += "<text x=\"" + fixed(x0 + pw / 2) + "\" y=\"" + fixed(oy + 22) + "\" text-anchor=\"middle\" font-size=\"13\">" +
           escape_xml(panel.title) + "</text>\n";
    svg += "<rect x=\"" + fixed(x0) + "\" y=\"" + fixed(y0) + "\" width=\"" + fixed(pw) + "\" height=\"" + fixed(ph) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (double y = ymin; y <= ymax + step * 1e-6; y += step) {
      svg += "<line x1=\"" + fixed(x0) + "\" x2=\"" + fixed(x0 + pw) + "\" y1=\"" + fixed(sy(y)) + "\" y2=\"" +
             fixed(sy(y)) + "\" stroke=\"#ddd\"/>\n";
      svg += "<text x=\"" + fixed(x0 - 6) + "\" y=\"" + fixed(sy(y) + 4) + "\" text-anchor=\"end\">" + format_tick(y) +
             "</text>\n";
    }
    for (const auto& [x, label] : panel.x_ticks) {
      svg += "<line x1=\"" + fixed(sx(x)) + "\" x2=\"" + fixed(sx(x)) + "\" y1=\"" + fixed(y0 + ph) + "\" y2=\"" +
             fixed(y0 + ph + 4) + "\" stroke=\"#444\"/>\n";
      svg += "<text x=\"" + fixed(sx(x)) + "\" y=\"" + fixed(y0 + ph + 16) + "\" text-anchor=\"middle\">" +
             escape_xml(label) + "</text>\n";
    }
    svg += "<text x=\"" + fixed(x0 + pw / 2) + "\" y=\"" + fixed(y0 + ph + 36) + "\" text-anchor=\"middle\">" +
           escape_xml(panel.x_label) + "</text>\n";
    svg += "<text transform=\"translate(" + fixed(ox + 16) + "," + fixed(y0 + ph / 2) +
           ") rotate(-90)\" text-anchor=\"middle\">" + escape_xml(panel.y_label) + "</text>\n";
    if (panel.reference) {
      svg += "<line x1=\"" + fixed(x0) + "\" x2=\"" + fixed(x0 + pw) + "\" y1=\"" + fixed(sy(*panel.reference)) +
             "\" y2=\"" + fixed(sy(*panel.reference)) + "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    }
    for (std::size_t s = 0; s < panel.series.size(); ++s) {
      const auto& series = panel.series[s];
      const std::string color = kPalette[s % std::size(kPalette)];
      std::string path;
      bool pen_down = false;
      std::string points;
      for (std::size_t i = 0; i < series.x.size(); ++i) {
        const auto v = parse_number(series.y[i]);
        if (!v) {
          pen_down = false;
          continue;
        }
        path += (pen_down ? " L" : " M") + fixed(sx(series.x[i])) + " " + fixed(sy(*v));
        pen_down = true;
        points += "<circle cx=\"" + fixed(sx(series.x[i])) + "\" cy=\"" + fixed(sy(*v)) + "\" r=\"3\" fill=\"" + color +
                  "\" data-series=\"" + escape_xml(series.name) + "\" data-x=\"" + format_tick(series.x[i]) +
                  "\" data-value=\"" + escape_xml(series.y[i]) + "\"><title>" + escape_xml(series.name) + ": " +
                  escape_xml(series.y[i]) + "</title></circle>\n";
      }
      if (!path.empty())
        svg += "<path d=\"" + path.substr(1) + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
      svg += points;
      const double ly = y0 + 8 + static_cast<double>(s) * 16;
      svg += "<line x1=\"" + fixed(x0 + pw + 10) + "\" x2=\"" + fixed(x0 + pw + 26) + "\" y1=\"" + fixed(ly) +
             "\" y2=\"" + fixed(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
      svg += "<text x=\"" + fixed(x0 + pw + 30) + "\" y=\"" + fixed(ly + 4) + "\">" + escape_xml(series.name) + "</text>\n";
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

const std::vector<std::string>& required_inputs() {
  static const std::vector<std::string> inputs = {
      "summary.csv",
      "analysis/pie_occurrence.csv",
      "analysis/pie_accuracy.csv",
      "analysis/pie_class_distribution.csv",
      "analysis/influence_bins.csv",
      "analysis/readability_ratios.csv",
  };
  return inputs;
}

namespace {

// Named-column view over a parsed table.
struct Frame {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  explicit Frame(Table t) {
    if (t.empty()) throw FormatError("empty CSV table");
    header = std::move(t.front());
    rows.assign(std::make_move_iterator(t.begin() + 1), std::make_move_iterator(t.end()));
    for (const auto& r : rows)
      if (r.size() != header.size()) throw FormatError("ragged CSV table");
  }
  std::size_t col(std::string_view name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError("CSV table lacks column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  }
};

double to_double(const std::string& s) {
  const auto v = parse_number(s);
  if (!v) throw FormatError("expected a number, got \"" + s + "\"");
  return *v;
}

// Distinct values in first-seen order.
std::vector<std::string> distinct(const Frame& f, std::string_view column) {
  std::vector<std::string> out;
  const auto c = f.col(column);
  for (const auto& r : f.rows)
    if (std::find(out.begin(), out.end(), r[c]) == out.end()) out.push_back(r[c]);
  return out;
}

// Threshold axis: categorical positions 0..k-1 in ascending numeric order.
std::vector<std::pair<double, std::string>> threshold_ticks(const std::vector<std::string>& thresholds) {
  std::vector<std::string> sorted = thresholds;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return to_double(a) < to_double(b); });
  std::vector<std::pair<double, std::string>> ticks;
  for (std::size_t i = 0; i < sorted.size(); ++i) ticks.emplace_back(static_cast<double>(i), sorted[i]);
  return ticks;
}

double tick_position(const std::vector<std::pair<double, std::string>>& ticks, const std::string& label) {
  for (const auto& [x, l] : ticks)
    if (l == label) return x;
  throw FormatError("unknown axis label " + label);
}

std::string pick_split(const Frame& f) {
  const auto splits = distinct(f, "split");
  if (std::find(splits.begin(), splits.end(), "test") != splits.end()) return "test";
  if (splits.empty()) throw FormatError("table has no rows");
  return splits.front();
}

std::string pie_fraction_figure(const Frame& occ) {
  std::vector<Panel> panels;
  const auto ticks = threshold_ticks(distinct(occ, "threshold"));
  for (const auto& split : distinct(occ, "split")) {
    Panel p{"PIEs on the " + split + " split", "pruning threshold", "fraction of examples that are PIEs", ticks, {}, {}};
    for (const auto& pruner : distinct(occ, "pruner_id")) {
      Series s{pruner, {}, {}};
      for (const auto& r : occ.rows) {
        if (r[occ.col("split")] != split || r[occ.col("pruner_id")] != pruner) continue;
        s.x.push_back(tick_position(ticks, r[occ.col("threshold")]));
        s.y.push_back(r[occ.col("pie_fraction")]);
      }
      p.series.push_back(std::move(s));
    }
    panels.push_back(std::move(p));
  }
  return render_svg("PIE fraction per pruning threshold", panels);
}

std::string accuracy_figure(const Frame& acc) {
  const auto split = pick_split(acc);
  const auto ticks = threshold_ticks(distinct(acc, "threshold"));
  std::vector<Panel> panels;
  for (const auto& pruner : distinct(acc, "pruner_id")) {
    Panel p{pruner + " (" + split + ")", "pruning threshold", "mean accuracy over initializations", ticks, {}, {}};
    for (const char* cond : {"unpruned", "pruned"}) {
      for (const char* subset : {"all", "pies"}) {
        Series s{std::string(cond) + " / " + subset, {}, {}};
        for (const auto& r : acc.rows) {
          if (r[acc.col("split")] != split || r[acc.col("pruner_id")] != pruner || r[acc.col("condition")] != cond ||
              r[acc.col("subset")] != subset)
            continue;
          s.x.push_back(tick_position(ticks, r[acc.col("threshold")]));
          s.y.push_back(r[acc.col("per_init_mean")]);
        }
        p.series.push_back(std::move(s));
      }
    }
    panels.push_back(std::move(p));
  }
  return render_svg("Accuracy on PIEs versus all examples", panels);
}

std::string class_distribution_figure(const Frame& dist) {
  const auto split = pick_split(dist);
  std::vector<Panel> panels;
  for (const auto& pruner : distinct(dist, "pruner_id")) {
    // the largest threshold of this pruner
    std::string threshold;
    for (const auto& r : dist.rows)
      if (r[dist.col("pruner_id")] == pruner &&
          (threshold.empty() || to_double(r[dist.col("threshold")]) > to_double(threshold)))
        threshold = r[dist.col("threshold")];
    Panel p{pruner + " at " + threshold + " (" + split + ")", "classes by train frequency", "fraction", {}, {}, {}};
    Series all{"all examples", {}, {}}, pies{"PIEs", {}, {}};
    for (const auto& r : dist.rows) {
      if (r[dist.col("split")] != split || r[dist.col("pruner_id")] != pruner || r[dist.col("threshold")] != threshold)
        continue;
      const double x = to_double(r[dist.col("rank")]);
      p.x_ticks.emplace_back(x, r[dist.col("class_name")]);
      all.x.push_back(x);
      all.y.push_back(r[dist.col("all_fraction")]);
      pies.x.push_back(x);
      pies.y.push_back(r[dist.col("pie_fraction")]);
    }
    p.series = {std::move(all), std::move(pies)};
    panels.push_back(std::move(p));
  }
  return render_svg("Class distribution of PIEs", panels);
}

std::string influence_figure(const Frame& bins) {
  std::vector<Panel> panels;
  for (const auto& threshold : distinct(bins, "threshold")) {
    Panel p{"threshold " + threshold, "EL2N bin (low to high influence)", "fraction of PIEs in bin", {}, {}, {}};
    std::set<int> seen;
    for (const auto& pruner : distinct(bins, "pruner_id")) {
      Series s{pruner, {}, {}};
      for (const auto& r : bins.rows) {
        if (r[bins.col("threshold")] != threshold || r[bins.col("pruner_id")] != pruner) continue;
        const double x = to_double(r[bins.col("bin_index")]);
        s.x.push_back(x);
        s.y.push_back(r[bins.col("pie_fraction")]);
        if (seen.insert(static_cast<int>(x)).second && (static_cast<int>(x) % 5 == 0 || x == 1))
          p.x_ticks.emplace_back(x, r[bins.col("bin_index")]);
      }
      p.series.push_back(std::move(s));
    }
    panels.push_back(std::move(p));
  }
  return render_svg("PIE fraction per EL2N bin", panels);
}

std::string readability_figure(const Frame& ratios) {
  const auto ticks = threshold_ticks(distinct(ratios, "threshold"));
  std::vector<Panel> panels;
  for (const auto& metric : distinct(ratios, "metric")) {
    Panel p{metric, "pruning threshold", "mean on PIEs / mean on all", ticks, {}, 1.0};
    for (const auto& pruner : distinct(ratios, "pruner_id")) {
      Series s{pruner, {}, {}};
      for (const auto& r : ratios.rows) {
        if (r[ratios.col("metric")] != metric || r[ratios.col("pruner_id")] != pruner) continue;
        s.x.push_back(tick_position(ticks, r[ratios.col("threshold")]));
        s.y.push_back(r[ratios.col("ratio")]);
      }
      p.series.push_back(std::move(s));
    }
    panels.push_back(std::move(p));
  }
  return render_svg("Readability of PIEs relative to all examples", panels, 4);
}

}  // namespace

Bundle write_report(const fs::path& run_dir, const fs::path& out_dir) {
  std::vector<std::string> missing;
  for (const auto& rel : required_inputs())
    if (!fs::exists(run_dir / rel)) missing.push_back(rel);
  if (!missing.empty()) {
    std::string msg = "report inputs missing in " + run_dir.string() + ":";
    for (const auto& m : missing) msg += " " + m;
    throw MissingInputError(msg);
  }
  std::map<std::string, std::string> text;
  for (const auto& rel : required_inputs()) text[rel] = harness::read_file(run_dir / rel);

  Bundle bundle;
  const auto emit = [&](const std::string& name, const std::string& content) {
    harness::write_file(out_dir / name, content);
    bundle.files.push_back(out_dir / name);
  };
  for (const auto& rel : required_inputs()) emit(fs::path(rel).filename().string(), text[rel]);
  emit("pie_fraction.svg", pie_fraction_figure(Frame(parse_csv(text["analysis/pie_occurrence.csv"]))));
  emit("accuracy_pies.svg", accuracy_figure(Frame(parse_csv(text["analysis/pie_accuracy.csv"]))));
  emit("class_distribution.svg", class_distribution_figure(Frame(parse_csv(text["analysis/pie_class_distribution.csv"]))));
  emit("influence_bins.svg", influence_figure(Frame(parse_csv(text["analysis/influence_bins.csv"]))));
  emit("readability_ratios.svg", readability_figure(Frame(parse_csv(text["analysis/readability_ratios.csv"]))));
  return bundle;
}

}  // namespace pielab::report
