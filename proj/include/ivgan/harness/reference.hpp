#pragma once

// Published reference values for the four comparison tables. Values are kept
// as their printed decimal strings so the rendered CSV is byte-stable.
// They are shown next to measured values in reports and never asserted.

#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace ivgan::harness {

struct ReferenceCell {
    std::string_view row;
    std::string_view column;
    std::string_view value;
};

struct ReferenceTable {
    int number;
    std::string_view title;
    std::vector<std::string_view> columns;
    std::vector<std::string_view> rows;
    std::vector<std::vector<std::string_view>> values;  // [row][column]

    std::optional<std::string_view> find(std::string_view row, std::string_view column) const
    {
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < columns.size(); ++c) {
                if (rows[r] == row && columns[c] == column) {
                    return values[r][c];
                }
            }
        }
        return std::nullopt;
    }
};

inline const std::vector<ReferenceTable>& reference_tables()
{
    static const std::vector<ReferenceTable> tables = {
        {1,
         "ANALYSIS OF COMMON LOSS FUNCTION OF GENERATIVE ADVERSARIAL NETWORK",
         {"Counter loss", "L1 loss", "L2 loss", "Confrontations and L1 losses", "Confrontation and L2 loss"},
         {"LU-JM", "MA-JM", "LU-PAD/%", "MA-PAD/%", "LU-HD/mm", "MA-HD/mm", "LU-AD/mm", "MA-AD/mm"},
         {{"0.8968", "0.9010", "0.9182", "0.9177", "0.9206"},
          {"0.9185", "0.9203", "0.9217", "0.9290", "0.9223"},
          {"4.8114", "4.4253", "3.9897", "3.9204", "3.3066"},
          {"5.4945", "5.7321", "5.7321", "4.8411", "10.7712"},
          {"0.2813", "0.2120", "0.2026", "0.2093", "0.2020"},
          {"0.2761", "0.4023", "0.2177", "0.2166", "0.2258"},
          {"0.0816", "0.0764", "0.0586", "0.0634", "0.0566"},
          {"0.0870", "0.0662", "0.0725", "0.0609", "0.0599"}}},
        {2,
         "RECONSTRUCTION LOSS L1",
         {"1", "2", "4", "8", "16", "32", "64", "128"},
         {"LU-JM", "MA-JM"},
         {{"0.8811", "0.8910", "0.8910", "0.9009", "0.9108", "0.9108", "0.9108", "0.9108"},
          {"0.9108", "0.9108", "0.9207", "0.9207", "0.9207", "0.9207", "0.9306", "0.9306"}}},
        {3,
         "RECONSTRUCTION LOSS L2",
         {"1", "2", "4", "8", "16", "32", "64", "128"},
         {"LU-JM", "MA-JM"},
         {{"0.8910", "0.9207", "0.9207", "0.9108", "0.9108", "0.9207", "0.9207", "0.9207"},
          {"0.9108", "0.9207", "0.9207", "0.9207", "0.9207", "0.9207", "0.9207", "0.9207"}}},
        {4,
         "EFFECTS OF DIFFERENT GENERATOR NETWORK STRUCTURES",
         {"Pix2Pix-1(U-Net)", "Pix2Pix-2(E-D)", "Method 1(no inputs)", "Method 2(within puts)"},
         {"LU-JM", "MA-JM", "Model size /M"},
         {{"0.9128", "0.9045", "0.9090", "0.9177"},
          {"0.9279", "0.9195", "0.9196", "0.9290"},
          {"226.4130", "79.7940", "158.6970", "158.6970"}}},
    };
    return tables;
}

inline const ReferenceTable& reference_table(int number)
{
    for (const auto& t : reference_tables()) {
        if (t.number == number) {
            return t;
        }
    }
    throw std::out_of_range("no reference table " + std::to_string(number));
}

/// Long-form CSV: table,row,column,value (one line per cell, tables in order,
/// rows then columns). This is the format of the checked-in fixture.
inline std::string reference_tables_csv()
{
    std::ostringstream os;
    os << "table,row,column,value\n";
    for (const auto& t : reference_tables()) {
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            for (std::size_t c = 0; c < t.columns.size(); ++c) {
                os << t.number << ',' << t.rows[r] << ',' << t.columns[c] << ',' << t.values[r][c] << '\n';
            }
        }
    }
    return os.str();
}

/// Table row label for each metric in metrics::kMetricNames order.
inline constexpr std::array<std::string_view, 8> kReferenceRowForMetric = {
    "LU-JM", "MA-JM", "LU-PAD/%", "MA-PAD/%", "LU-HD/mm", "MA-HD/mm", "LU-AD/mm", "MA-AD/mm"};

}  // namespace ivgan::harness
