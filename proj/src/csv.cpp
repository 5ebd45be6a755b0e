#include "ecoassoc/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace ecoassoc::csv {

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string quote_if_needed(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"')
      q += "\"\"";
    else
      q.push_back(c);
  }
  q.push_back('"');
  return q;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

} // namespace

Table parse_table(std::string_view text, const std::string &source_name) {
  Table t;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_done = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (trim(line).empty()) {
      if (end == text.size())
        break;
      continue;
    }
    auto fields = split_line(line);
    if (!header_done) {
      t.corner = fields.front();
      t.columns.assign(fields.begin() + 1, fields.end());
      header_done = true;
    } else {
      if (fields.size() != t.columns.size() + 1) {
        throw ValidationError(source_name + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(t.columns.size() + 1));
      }
      t.row_ids.push_back(fields.front());
      t.cells.emplace_back(fields.begin() + 1, fields.end());
    }
    if (end == text.size())
      break;
  }
  if (!header_done)
    throw ValidationError(source_name + ": empty file");
  return t;
}

Table read_table(const std::filesystem::path &path) {
  return parse_table(read_file(path), path.string());
}

double parse_double(std::string_view s, bool &ok) {
  s = trim(s);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  ok = ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
  return v;
}

Matrix numeric(const Table &table, const std::string &source_name) {
  Matrix m(static_cast<Eigen::Index>(table.row_ids.size()),
           static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t r = 0; r < table.cells.size(); ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      bool ok = false;
      double v = parse_double(table.cells[r][c], ok);
      if (!ok) {
        throw ValidationError(source_name + ": unparseable cell '" + table.cells[r][c] +
                              "' at row " + std::to_string(r + 1) + " (" + table.row_ids[r] +
                              "), column " + std::to_string(c + 1) + " (" + table.columns[c] +
                              ")");
      }
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return m;
}

std::string format_double(double v) {
  if (v == 0.0)
    return "0"; // also folds -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc())
    throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::string to_csv(const std::string &corner, const std::vector<std::string> &row_ids,
                   const std::vector<std::string> &columns, const Matrix &values) {
  if (static_cast<std::size_t>(values.rows()) != row_ids.size() ||
      static_cast<std::size_t>(values.cols()) != columns.size())
    throw ValidationError("to_csv: labels do not match matrix shape");
  std::string out = quote_if_needed(corner);
  for (const auto &c : columns) {
    out.push_back(',');
    out += quote_if_needed(c);
  }
  out.push_back('\n');
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out += quote_if_needed(row_ids[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out.push_back(',');
      out += format_double(values(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

void write_atomic(const std::filesystem::path &path, std::string_view content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ValidationError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out)
      throw ValidationError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> numbered(const std::string &prefix, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(prefix + std::to_string(i));
  return out;
}

} // namespace ecoassoc::csv
