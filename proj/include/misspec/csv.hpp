#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace misspec {

/// 17 significant digits, locale independent. Non-finite values become "".
std::string format_number(double x);
std::string format_number(std::optional<double> x);

/// Splits one CSV record. Double-quoted fields may contain commas and "".
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string quote_csv(std::string_view field);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void header(const std::vector<std::string>& names);
    CsvWriter& cell(std::string_view text);
    CsvWriter& cell(double x) { return cell(format_number(x)); }
    CsvWriter& cell(std::optional<double> x) { return cell(format_number(x)); }
    CsvWriter& cell(long long x) { return cell(std::to_string(x)); }
    void end_row();

private:
    std::ostream& out_;
    bool first_ = true;
};

}  // namespace misspec
