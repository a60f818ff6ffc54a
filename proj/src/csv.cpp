#include "fplf/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fplf/core.hpp"

namespace fplf::csv {

Table::Table(std::vector<std::string> header) : header_(std::move(header)) {
    for (std::size_t i = 0; i < header_.size(); ++i) index_.emplace(header_[i], i);
}

namespace {

std::vector<std::vector<std::string>> split_records(std::string_view text, const std::string& source) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t i = 0;
    const auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
        const bool blank = record.size() == 1 && record[0].empty();
        if (!blank) records.push_back(std::move(record));
        record.clear();
    };
    while (i < text.size()) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\n') {
            end_record();
        } else if (c != '\r') {
            field.push_back(c);
            field_started = true;
        }
        ++i;
    }
    if (quoted) fail(source + ": unterminated quoted field");
    if (field_started || !record.empty()) end_record();
    return records;
}

}  // namespace

Table Table::parse(std::string_view text, std::string source) {
    // Peel off leading comment lines before tokenizing.
    std::vector<std::string> comments;
    std::size_t pos = 0;
    while (pos < text.size() && text[pos] == '#') {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        comments.emplace_back(trim(text.substr(pos + 1, nl - pos - 1)));
        pos = nl + 1;
    }
    auto records = split_records(text.substr(std::min(pos, text.size())), source);
    if (records.empty()) fail(source + ": missing CSV header");
    Table table(records.front());
    table.source_ = std::move(source);
    table.comments_ = std::move(comments);
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header_.size()) {
            fail(table.source_ + ": row " + std::to_string(r) + " has " +
                 std::to_string(records[r].size()) + " fields, header has " +
                 std::to_string(table.header_.size()));
        }
        table.rows_.push_back(std::move(records[r]));
    }
    return table;
}

Table Table::read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void Table::write(std::ostream& out) const {
    for (const auto& c : comments_) out << '#' << c << '\n';
    const auto write_line = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            out << escape(fields[i]);
        }
        out << '\n';
    };
    write_line(header_);
    for (const auto& r : rows_) write_line(r);
}

void Table::write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot write " + path.string());
    write(out);
}

std::string Table::to_string() const {
    std::ostringstream out;
    write(out);
    return out.str();
}

bool Table::has_column(std::string_view name) const {
    return index_.find(std::string(name)) != index_.end();
}

std::size_t Table::column(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw Error(ErrorKind::schema, source_ + ": missing field: " + std::string(name));
    return it->second;
}

void Table::require_columns(const std::vector<std::string>& names) const {
    for (const auto& n : names) (void)column(n);
}

void Table::add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) fail("CSV row width does not match header");
    rows_.push_back(std::move(row));
}

const std::string& Table::cell(std::size_t row, std::string_view column_name) const {
    return rows_.at(row)[column(column_name)];
}

void Table::cell_error(std::size_t row, std::string_view column_name, const std::string& what) const {
    fail(source_ + ": row " + std::to_string(row + 1) + ", column '" + std::string(column_name) +
         "': " + what);
}

long long Table::get_int(std::size_t row, std::string_view column_name) const {
    const std::string text = trim(cell(row, column_name));
    long long value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        // Integers written as e.g. "3.0" are accepted when integral.
        double d = 0.0;
        auto [p2, e2] = std::from_chars(text.data(), text.data() + text.size(), d);
        if (e2 == std::errc{} && p2 == text.data() + text.size() && !text.empty() &&
            d == static_cast<double>(static_cast<long long>(d)))
            return static_cast<long long>(d);
        cell_error(row, column_name, "unparseable integer '" + text + "'");
    }
    return value;
}

double Table::get_double(std::size_t row, std::string_view column_name) const {
    const std::string text = trim(cell(row, column_name));
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        cell_error(row, column_name, "unparseable number '" + text + "'");
    return value;
}

std::optional<double> Table::get_optional_double(std::size_t row, std::string_view column_name) const {
    const std::string text = trim(cell(row, column_name));
    if (text.empty()) return std::nullopt;
    return get_double(row, column_name);
}

bool Table::get_bool(std::size_t row, std::string_view column_name) const {
    const std::string text = to_lower(trim(cell(row, column_name)));
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    cell_error(row, column_name, "unparseable boolean '" + text + "'");
}

}  // namespace fplf::csv
