#ifndef TLAB_IO_HPP
#define TLAB_IO_HPP

#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace tlab {

// write-then-rename; partial files never appear under the final name
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& doc);

// CSV with a header row; cells formatted with fmt_double for doubles
class CsvBuilder {
  public:
    explicit CsvBuilder(std::vector<std::string> header);
    void row(const std::vector<double>& cells);
    void raw_row(const std::vector<std::string>& cells);
    const std::string& str() const { return buf_; }

  private:
    std::size_t width_;
    std::string buf_;
};

std::uint64_t fnv1a_hash(const std::string& data);

}  // namespace tlab

#endif
