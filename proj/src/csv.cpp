#include "condsub/data.hpp"
#include "condsub/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace condsub {

namespace {

struct Field {
  std::string text;
  bool quoted = false;
};

using Record = std::vector<Field>;

// RFC-4180 tokenizer. Returns records with the 1-based physical line on
// which each one starts.
std::vector<std::pair<std::size_t, Record>> tokenize(const std::string& s, std::string_view source) {
  std::vector<std::pair<std::size_t, Record>> records;
  std::size_t i = 0, line = 1;
  const std::size_t n = s.size();
  while (i < n) {
    const std::size_t start_line = line;
    Record rec;
    Field field;
    bool in_quotes = false, after_quote = false, end_of_record = false;
    while (i < n && !end_of_record) {
      const char c = s[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < n && s[i + 1] == '"') {
            field.text.push_back('"');
            i += 2;
            continue;
          }
          in_quotes = false;
          after_quote = true;
        } else {
          if (c == '\n') ++line;
          field.text.push_back(c);
        }
        ++i;
        continue;
      }
      switch (c) {
        case '"':
          if (!field.text.empty() || after_quote)
            throw LoadError(LoadErrorKind::unparseable_cell,
                            "stray quote on line " + std::to_string(line) + " of " + std::string(source));
          in_quotes = true;
          field.quoted = true;
          ++i;
          break;
        case ',':
          rec.push_back(std::move(field));
          field = Field{};
          after_quote = false;
          ++i;
          break;
        case '\r':
          ++i;
          break;
        case '\n':
          ++line;
          ++i;
          end_of_record = true;
          break;
        default:
          if (after_quote)
            throw LoadError(LoadErrorKind::unparseable_cell,
                            "text after closing quote on line " + std::to_string(line) + " of " +
                                std::string(source));
          field.text.push_back(c);
          ++i;
      }
    }
    if (in_quotes)
      throw LoadError(LoadErrorKind::unparseable_cell,
                      "unterminated quoted field starting on line " + std::to_string(start_line) +
                          " of " + std::string(source));
    rec.push_back(std::move(field));
    const bool blank = rec.size() == 1 && rec[0].text.empty() && !rec[0].quoted;
    if (!blank) records.emplace_back(start_line, std::move(rec));
  }
  return records;
}

std::string_view trim(std::string_view v) {
  while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
  while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
  return v;
}

std::optional<double> parse_decimal(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value))
    return std::nullopt;
  return value;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos && !s.empty() && s.front() != '#') return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, r.ptr);
}

Schema Schema::parse(std::string_view text) {
  Schema schema;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto colon = line.rfind(':');
    if (colon == std::string_view::npos)
      throw LoadError(LoadErrorKind::schema, "schema line " + std::to_string(line_no) + ": expected name:type");
    const std::string name(trim(line.substr(0, colon)));
    const std::string_view type = trim(line.substr(colon + 1));
    ColumnType t;
    if (type == "numeric")
      t = ColumnType::numeric;
    else if (type == "categorical")
      t = ColumnType::categorical;
    else
      throw LoadError(LoadErrorKind::schema, "schema line " + std::to_string(line_no) +
                                                 ": unknown type '" + std::string(type) + "'");
    if (!schema.types.emplace(name, t).second)
      throw LoadError(LoadErrorKind::schema, "schema line " + std::to_string(line_no) +
                                                 ": column '" + name + "' declared twice");
  }
  return schema;
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadErrorKind::io, "cannot open schema file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text);
}

Dataset read_csv(std::istream& in, const CsvOptions& options, std::string_view source) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);

  // provenance comment lines before the header
  std::size_t pos = 0;
  while (pos < text.size() && text[pos] == '#') {
    const auto nl = text.find('\n', pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
  }
  auto records = tokenize(text.substr(pos), source);
  if (records.empty())
    throw LoadError(LoadErrorKind::missing_header, "no header row in " + std::string(source));

  const Record& header = records.front().second;
  const std::size_t n_cols = header.size();
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n_cols; ++c) {
    std::string name(header[c].quoted ? std::string_view(header[c].text) : trim(header[c].text));
    if (name.empty())
      throw LoadError(LoadErrorKind::missing_header,
                      "empty column name at position " + std::to_string(c + 1) + " in " + std::string(source));
    if (std::find(names.begin(), names.end(), name) != names.end())
      throw LoadError(LoadErrorKind::duplicate_column,
                      "duplicate column name '" + name + "' in " + std::string(source), 0, c + 1);
    names.push_back(std::move(name));
  }
  if (options.schema) {
    for (const auto& [name, type] : options.schema->types) {
      if (std::find(names.begin(), names.end(), name) == names.end())
        throw LoadError(LoadErrorKind::schema, "schema declares unknown column '" + name + "'");
    }
  }

  const std::size_t n_rows = records.size() - 1;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [line, rec] = records[r];
    if (rec.size() != n_cols)
      throw LoadError(LoadErrorKind::ragged_row,
                      "ragged row " + std::to_string(r) + " (line " + std::to_string(line) + "): expected " +
                          std::to_string(n_cols) + " fields, found " + std::to_string(rec.size()),
                      r, 0);
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (trim(rec[c].text).empty())
        throw LoadError(LoadErrorKind::missing_value,
                        "missing value at (" + std::to_string(r) + ", " + std::to_string(c + 1) + ") [column '" +
                            names[c] + "'] in " + std::string(source),
                        r, c + 1);
    }
  }

  std::vector<ColumnInfo> info(n_cols);
  Eigen::MatrixXd cells(static_cast<Index>(n_rows), static_cast<Index>(n_cols));
  for (std::size_t c = 0; c < n_cols; ++c) {
    info[c].name = names[c];
    std::optional<ColumnType> declared;
    if (options.schema) {
      if (auto it = options.schema->types.find(names[c]); it != options.schema->types.end())
        declared = it->second;
    }

    bool numeric = declared.value_or(ColumnType::numeric) == ColumnType::numeric;
    std::vector<double> parsed(n_rows);
    if (numeric) {
      for (std::size_t r = 0; r < n_rows && numeric; ++r) {
        auto v = parse_decimal(records[r + 1].second[c].text);
        if (v) {
          parsed[r] = *v;
        } else if (declared) {
          throw LoadError(LoadErrorKind::unparseable_cell,
                          "unparseable numeric cell '" + records[r + 1].second[c].text + "' at (" +
                              std::to_string(r + 1) + ", " + std::to_string(c + 1) + ") [column '" + names[c] +
                              "'] in " + std::string(source),
                          r + 1, c + 1);
        } else {
          numeric = false;
        }
      }
    }

    if (numeric) {
      info[c].type = ColumnType::numeric;
      for (std::size_t r = 0; r < n_rows; ++r) cells(static_cast<Index>(r), static_cast<Index>(c)) = parsed[r];
    } else {
      info[c].type = ColumnType::categorical;
      std::map<std::string, double> codes;
      for (std::size_t r = 0; r < n_rows; ++r) {
        const auto& f = records[r + 1].second[c];
        codes.emplace(f.quoted ? f.text : std::string(trim(f.text)), 0.0);
      }
      double next = 0.0;
      for (auto& [level, code] : codes) {
        code = next++;
        info[c].levels.push_back(level);
      }
      for (std::size_t r = 0; r < n_rows; ++r) {
        const auto& f = records[r + 1].second[c];
        cells(static_cast<Index>(r), static_cast<Index>(c)) =
            codes.at(f.quoted ? f.text : std::string(trim(f.text)));
      }
    }
  }

  std::optional<Eigen::VectorXd> target;
  std::string target_name = "y";
  if (options.target) {
    auto it = std::find(names.begin(), names.end(), *options.target);
    if (it == names.end())
      throw LoadError(LoadErrorKind::schema, "target column '" + *options.target + "' not found in " + std::string(source));
    const auto t = static_cast<std::size_t>(it - names.begin());
    if (!info[t].is_numeric())
      throw LoadError(LoadErrorKind::schema, "target column '" + *options.target + "' is not numeric");
    target = cells.col(static_cast<Index>(t));
    target_name = *options.target;
    info.erase(info.begin() + static_cast<std::ptrdiff_t>(t));
    Eigen::MatrixXd rest(cells.rows(), cells.cols() - 1);
    rest << cells.leftCols(static_cast<Index>(t)), cells.rightCols(cells.cols() - static_cast<Index>(t) - 1);
    cells = std::move(rest);
  }

  return Dataset(std::move(info), std::move(cells), std::move(target), std::move(target_name));
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadErrorKind::io, "cannot open " + path.string());
  return read_csv(in, options, path.string());
}

void write_csv(const Dataset& data, std::ostream& out) {
  const auto& cols = data.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << quote_if_needed(cols[c].name);
  if (data.has_target()) out << (cols.empty() ? "" : ",") << quote_if_needed(data.target_name());
  out << '\n';
  for (Index i = 0; i < data.n_rows(); ++i) {
    for (Index j = 0; j < data.n_features(); ++j) {
      if (j) out << ',';
      if (data.column(j).is_numeric())
        out << format_double(data(i, j));
      else
        out << quote_if_needed(data.level_name(j, data(i, j)));
    }
    if (data.has_target()) out << (data.n_features() ? "," : "") << format_double(data.target()(i));
    out << '\n';
  }
}

}  // namespace condsub
