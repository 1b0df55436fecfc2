#include "tlab/io.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "tlab/common.hpp"

namespace tlab {

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    const auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp);
        os << content;
    }
    std::filesystem::rename(tmp, path);
}

void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& doc) {
    write_text_atomic(path, doc.dump(2) + "\n");
}

CsvBuilder::CsvBuilder(std::vector<std::string> header) : width_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += header[i];
    }
    buf_ += '\n';
}

void CsvBuilder::row(const std::vector<double>& cells) {
    if (cells.size() != width_) throw std::runtime_error("csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += fmt_double(cells[i]);
    }
    buf_ += '\n';
}

void CsvBuilder::raw_row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::runtime_error("csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += cells[i];
    }
    buf_ += '\n';
}

std::uint64_t fnv1a_hash(const std::string& data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace tlab
