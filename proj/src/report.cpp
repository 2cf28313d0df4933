#include "allwas/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "allwas/error.hpp"
#include "json.hpp"

namespace allwas {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string safe_file_part(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '-';
  }
  return s;
}

const CellData* find_cell(std::span<const CellData> cells, const std::string& group, const std::string& method) {
  for (const auto& c : cells) {
    if (c.group() == group && c.method == method) return &c;
  }
  return nullptr;
}

// Mean, min and max of f1 per labeled count.
struct CurvePoint {
  double mean = 0.0, lo = 0.0, hi = 0.0;
};

std::map<std::size_t, CurvePoint> curve(const CellData& cell) {
  std::map<std::size_t, std::vector<double>> by_x;
  for (const auto& r : cell.rows) by_x[r.labeled].push_back(r.f1);
  std::map<std::size_t, CurvePoint> out;
  for (const auto& [x, ys] : by_x) {
    CurvePoint p;
    double sum = 0.0;
    for (double y : ys) sum += y;
    p.mean = sum / static_cast<double>(ys.size());
    p.lo = *std::min_element(ys.begin(), ys.end());
    p.hi = *std::max_element(ys.begin(), ys.end());
    out[x] = p;
  }
  return out;
}

}  // namespace

int Comparison::direction() const {
  if (mean_a > mean_b) return 1;
  if (mean_a < mean_b) return -1;
  return 0;
}

CellData cell_from_record(const RunRecord& record) {
  CellData c;
  c.cell = record.cell;
  c.dataset = record.dataset;
  c.method = record.method;
  c.setting = record.rows.empty() ? std::string() : record.rows.front().setting;
  c.rows = record.rows;
  return c;
}

std::vector<CellData> load_cells(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> metas;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 10 && name.ends_with(".meta.json")) metas.push_back(entry.path());
  }
  std::sort(metas.begin(), metas.end());
  std::vector<CellData> cells;
  for (const auto& meta_path : metas) {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(read_file(meta_path));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt run metadata " + meta_path.string() + ": " + e.what());
    }
    if (meta.value("schema_version", 0) != kRunSchemaVersion) {
      throw DataError("unsupported schema_version in " + meta_path.string());
    }
    CellData c;
    c.cell = meta.value("cell", std::string());
    c.dataset = meta.value("dataset", std::string());
    c.setting = meta.value("setting", std::string());
    c.method = meta.value("method", std::string());
    const fs::path csv = dir / (c.cell + ".csv");
    if (!fs::exists(csv)) continue;  // run still in progress
    c.rows = parse_rows_csv(read_file(csv));
    cells.push_back(std::move(c));
  }
  if (cells.empty()) throw DataError("no finished runs found in " + dir.string());
  return cells;
}

Comparison compare_methods(std::span<const CellData> cells, const std::string& group,
                           const std::string& method_a, const std::string& method_b,
                           std::optional<std::size_t> labeled) {
  const CellData* a = find_cell(cells, group, method_a);
  const CellData* b = find_cell(cells, group, method_b);
  if (!a) throw DataError("no cell for method '" + method_a + "' in group " + group);
  if (!b) throw DataError("no cell for method '" + method_b + "' in group " + group);

  std::map<std::pair<std::size_t, std::size_t>, double> index;
  for (const auto& r : b->rows) {
    if (!labeled || r.labeled == *labeled) index[{r.seed, r.iteration}] = r.f1;
  }
  std::vector<double> xa, xb;
  for (const auto& r : a->rows) {
    if (labeled && r.labeled != *labeled) continue;
    auto it = index.find({r.seed, r.iteration});
    if (it == index.end()) continue;
    xa.push_back(r.f1);
    xb.push_back(it->second);
  }

  Comparison cmp;
  cmp.group = group;
  cmp.method_a = method_a;
  cmp.method_b = method_b;
  cmp.labeled = labeled;
  cmp.n_pairs = xa.size();
  if (xa.empty()) throw DataError("methods '" + method_a + "' and '" + method_b + "' share no paired rows");
  for (std::size_t i = 0; i < xa.size(); ++i) {
    cmp.mean_a += xa[i];
    cmp.mean_b += xb[i];
  }
  cmp.mean_a /= static_cast<double>(xa.size());
  cmp.mean_b /= static_cast<double>(xb.size());
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < xa.size(); ++i) nonzero += xa[i] != xb[i];
  if (nonzero >= 5 || nonzero == 0) cmp.test = wilcoxon_signed_rank(xa, xb);
  return cmp;
}

std::string significance_csv(std::span<const CellData> cells) {
  std::map<std::string, std::vector<std::string>> methods;
  for (const auto& c : cells) methods[c.group()].push_back(c.method);
  std::string out = "group,method_a,method_b,n,statistic,p,p_bonferroni,direction\n";
  for (auto& [group, ms] : methods) {
    std::sort(ms.begin(), ms.end());
    const std::size_t m = ms.size() * (ms.size() - 1) / 2;
    for (const auto& a : ms) {
      for (const auto& b : ms) {
        if (a == b) continue;
        const Comparison cmp = compare_methods(cells, group, a, b);
        const int dir = cmp.direction();
        out += group + "," + a + "," + b + "," + std::to_string(cmp.n_pairs) + ",";
        if (cmp.test) {
          out += fmt(cmp.test->statistic) + "," + fmt(cmp.test->p) + "," + fmt(bonferroni(cmp.test->p, m));
        } else {
          out += "NA,NA,NA";
        }
        out += std::string(",") + (dir > 0 ? "a>b" : dir < 0 ? "a<b" : "a=b") + "\n";
      }
    }
  }
  return out;
}

std::string learning_curve_svg(std::span<const CellData> cells, const std::string& title) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const double width = 720, height = 440, left = 60, right = 220, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;

  std::vector<std::map<std::size_t, CurvePoint>> curves;
  std::size_t xmin = SIZE_MAX, xmax = 0;
  for (const auto& c : cells) {
    curves.push_back(curve(c));
    for (const auto& [x, p] : curves.back()) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
  }
  if (curves.empty() || xmin == SIZE_MAX) {
    xmin = 0;
    xmax = 1;
  }
  if (xmax == xmin) ++xmax;
  auto sx = [&](double x) { return left + pw * (x - static_cast<double>(xmin)) / static_cast<double>(xmax - xmin); };
  auto sy = [&](double y) { return top + ph * (1.0 - std::clamp(y, 0.0, 1.0)); };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
       "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(left) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" + xml_escape(title) +
       "</text>\n";

  // Axes and ticks.
  s += "<g stroke=\"#333\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top + ph) + "\" x2=\"" + fmt(left + pw) + "\" y2=\"" +
       fmt(top + ph) + "\"/>\n";
  s += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(left) + "\" y2=\"" + fmt(top + ph) +
       "\"/>\n";
  s += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    s += "<line x1=\"" + fmt(left - 4) + "\" y1=\"" + fmt(sy(y)) + "\" x2=\"" + fmt(left + pw) + "\" y2=\"" +
         fmt(sy(y)) + "\" stroke=\"#ddd\"/>\n";
    s += "<text x=\"" + fmt(left - 8) + "\" y=\"" + fmt(sy(y) + 4) + "\" text-anchor=\"end\">" + fmt(y, "%.1f") +
         "</text>\n";
  }
  std::set<std::size_t> xs;
  for (const auto& cv : curves) {
    for (const auto& [x, p] : cv) xs.insert(x);
  }
  for (auto x : xs) {
    s += "<text x=\"" + fmt(sx(static_cast<double>(x))) + "\" y=\"" + fmt(top + ph + 18) +
         "\" text-anchor=\"middle\">" + std::to_string(x) + "</text>\n";
  }
  s += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(height - 10) +
       "\" text-anchor=\"middle\">labeled examples</text>\n";
  s += "<text x=\"16\" y=\"" + fmt(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fmt(top + ph / 2) + ")\">F1</text>\n";
  s += "</g>\n";

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    const auto& cv = curves[i];
    if (cv.empty()) continue;
    std::string band, line;
    for (const auto& [x, p] : cv) band += fmt(sx(static_cast<double>(x))) + "," + fmt(sy(p.hi)) + " ";
    for (auto it = cv.rbegin(); it != cv.rend(); ++it) {
      band += fmt(sx(static_cast<double>(it->first))) + "," + fmt(sy(it->second.lo)) + " ";
    }
    for (const auto& [x, p] : cv) line += fmt(sx(static_cast<double>(x))) + "," + fmt(sy(p.mean)) + " ";
    band.pop_back();
    line.pop_back();
    s += "<polygon points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(i);
    s += "<line x1=\"" + fmt(left + pw + 14) + "\" y1=\"" + fmt(ly) + "\" x2=\"" + fmt(left + pw + 34) +
         "\" y2=\"" + fmt(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt(left + pw + 40) + "\" y=\"" + fmt(ly + 4) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + xml_escape(cells[i].method) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::vector<fs::path> write_report(const fs::path& dir) {
  const auto cells = load_cells(dir);
  std::vector<fs::path> written;
  const fs::path sig = dir / "significance.csv";
  write_file(sig, significance_csv(cells));
  written.push_back(sig);

  std::map<std::string, std::vector<CellData>> groups;
  for (const auto& c : cells) groups[c.group()].push_back(c);
  for (const auto& [group, members] : groups) {
    const auto& first = members.front();
    const fs::path svg = dir / ("curves_" + safe_file_part(first.dataset) + "_" + safe_file_part(first.setting) + ".svg");
    write_file(svg, learning_curve_svg(members, first.dataset + " (" + first.setting + ")"));
    written.push_back(svg);
  }
  return written;
}

}  // namespace allwas
