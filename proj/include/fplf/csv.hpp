#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fplf::csv {

// A header-addressed CSV table. RFC 4180 quoting; lines starting with '#'
// before the header are kept as comments.
class Table {
public:
    Table() = default;
    explicit Table(std::vector<std::string> header);

    static Table parse(std::string_view text, std::string source = "<memory>");
    static Table read(const std::filesystem::path& path);

    void write(std::ostream& out) const;
    void write(const std::filesystem::path& path) const;
    std::string to_string() const;

    const std::vector<std::string>& header() const noexcept { return header_; }
    const std::vector<std::string>& comments() const noexcept { return comments_; }
    std::size_t size() const noexcept { return rows_.size(); }
    const std::string& source() const noexcept { return source_; }

    bool has_column(std::string_view name) const;
    std::size_t column(std::string_view name) const;  // throws naming the column
    void require_columns(const std::vector<std::string>& names) const;

    void add_comment(std::string line) { comments_.push_back(std::move(line)); }
    void add_row(std::vector<std::string> row);
    const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }

    const std::string& cell(std::size_t row, std::string_view column) const;
    long long get_int(std::size_t row, std::string_view column) const;
    double get_double(std::size_t row, std::string_view column) const;
    bool get_bool(std::size_t row, std::string_view column) const;
    std::optional<double> get_optional_double(std::size_t row, std::string_view column) const;

private:
    [[noreturn]] void cell_error(std::size_t row, std::string_view column,
                                 const std::string& what) const;

    std::string source_ = "<memory>";
    std::vector<std::string> header_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

std::string escape(std::string_view field);

}  // namespace fplf::csv
