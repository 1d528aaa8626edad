#include "itsus/trajectory_io.h"

#include <charconv>
#include <fstream>
#include <sstream>

namespace itsus {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& field, const std::string& context) {
  if (field == "NA" || field == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e)
    throw ConfigError("not a number: '" + field + "'", context);
  return v;
}

void write_trajectory(const std::filesystem::path& path, std::span<const CollectiveVariable> cvs,
                      std::span<const TrajectoryRecord> records, std::size_t dim) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing", path.string());
  out << "time";
  for (std::size_t i = 0; i < dim; ++i) out << ",q" << i;
  out << ",U";
  for (const auto& cv : cvs) out << ',' << cv.name;
  out << ",window_id\n";
  for (const auto& r : records) {
    out << format_double(r.time);
    for (double q : r.coords) out << ',' << format_double(q);
    out << ',' << format_double(r.potential);
    for (double v : r.cvs) out << ',' << format_double(v);
    out << ',' << r.window_id << '\n';
  }
  if (!out) throw ConfigError("write failed", path.string());
}

TrajectoryFile read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trajectory", path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trajectory file", path.string());
  const auto header = split_csv(line);
  if (header.size() < 3 || header.front() != "time" || header.back() != "window_id")
    throw ConfigError("bad trajectory header", path.string());
  std::size_t u_col = 0;
  for (std::size_t i = 1; i < header.size(); ++i)
    if (header[i] == "U") {
      u_col = i;
      break;
    }
  if (u_col == 0) throw ConfigError("trajectory header lacks U column", path.string());

  TrajectoryFile tf;
  tf.dim = u_col - 1;
  for (std::size_t i = u_col + 1; i + 1 < header.size(); ++i) tf.cv_names.push_back(header[i]);
  const std::size_t ncol = header.size();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    if (f.size() != ncol) throw ConfigError("wrong column count", ctx);
    TrajectoryRecord r;
    r.time = parse_double(f[0], ctx);
    for (std::size_t i = 0; i < tf.dim; ++i) r.coords.push_back(parse_double(f[1 + i], ctx));
    r.potential = parse_double(f[u_col], ctx);
    for (std::size_t i = 0; i < tf.cv_names.size(); ++i)
      r.cvs.push_back(parse_double(f[u_col + 1 + i], ctx));
    r.window_id = std::stoi(f.back());
    tf.records.push_back(std::move(r));
  }
  return tf;
}

}  // namespace itsus
