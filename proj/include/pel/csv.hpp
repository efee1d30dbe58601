#ifndef PEL_CSV_HPP
#define PEL_CSV_HPP

#include <string>
#include <vector>

namespace pel {

/// Column-major numeric table with a CSV header. All pipeline file formats
/// are tables of doubles; formatting is fixed ("%.12g") so identical data
/// serializes to identical bytes.
struct DataTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // one vector per column

    std::size_t rows() const { return data.empty() ? 0 : data.front().size(); }
    int find(const std::string& name) const;
    bool has(const std::string& name) const { return find(name) >= 0; }
    std::vector<double>& col(const std::string& name);
    const std::vector<double>& col(const std::string& name) const;
    void add_column(const std::string& name, std::vector<double> values = {});

    std::string to_csv() const;
    void write_csv(const std::string& path) const;
    static DataTable from_csv(const std::string& text);
    static DataTable read_csv(const std::string& path);
};

std::string format_double(double v);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pel

#endif
