#include "pel/csv.hpp"

#include "pel/common.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace pel {

int DataTable::find(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<double>& DataTable::col(const std::string& name) {
    const int i = find(name);
    if (i < 0) throw InvalidParameterError("DataTable: no column '" + name + "'");
    return data[i];
}

const std::vector<double>& DataTable::col(const std::string& name) const {
    const int i = find(name);
    if (i < 0) throw InvalidParameterError("DataTable: no column '" + name + "'");
    return data[i];
}

void DataTable::add_column(const std::string& name, std::vector<double> values) {
    if (has(name)) throw InvalidParameterError("DataTable: duplicate column '" + name + "'");
    if (!data.empty() && !values.empty() && values.size() != rows())
        throw InvalidParameterError("DataTable: column '" + name + "' has mismatched length");
    columns.push_back(name);
    data.push_back(std::move(values));
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string DataTable::to_csv() const {
    std::string out;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (c) out += ',';
        out += columns[c];
    }
    out += '\n';
    const std::size_t n = rows();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < data.size(); ++c) {
            if (c) out += ',';
            out += format_double(data[c][r]);
        }
        out += '\n';
    }
    return out;
}

void DataTable::write_csv(const std::string& path) const { write_text_file(path, to_csv()); }

DataTable DataTable::from_csv(const std::string& text) {
    DataTable t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InvalidParameterError("from_csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream header(line);
    std::string field;
    while (std::getline(header, field, ',')) t.add_column(field);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream row(line);
        std::size_t c = 0;
        while (std::getline(row, field, ',')) {
            if (c >= t.columns.size()) throw InvalidParameterError("from_csv: row wider than header");
            t.data[c++].push_back(std::stod(field));
        }
        if (c != t.columns.size()) throw InvalidParameterError("from_csv: row narrower than header");
    }
    return t;
}

DataTable DataTable::read_csv(const std::string& path) { return from_csv(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << text;
}

}  // namespace pel
