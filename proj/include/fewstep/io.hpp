#ifndef FEWSTEP_IO_HPP
#define FEWSTEP_IO_HPP

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

#include "fewstep/tensor.hpp"

namespace fewstep {

// All writers go through a temp-file-and-rename so readers never observe a
// partial file.
void atomic_write_bytes(const std::string& path, const std::string& bytes);
void atomic_write_text(const std::string& path, const std::string& text);

// Raw little-endian float64 payload at `path` plus a `path`.json sidecar
// describing shape and layout.
void write_tensor(const std::string& path, const LatentTensor& tensor);
LatentTensor read_tensor(const std::string& path);

// Doubles are rendered with std::to_chars (shortest round-trip form) so
// replayed runs produce byte-identical files.
std::string format_double(double v);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
// Same layout with preformatted cells, for tables with text columns.
void write_csv_text(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

// Flat parameter vector with a one-line JSON descriptor header.
void write_params(const std::string& path, const Eigen::VectorXd& params,
                  const nlohmann::json& descriptor);
Eigen::VectorXd read_params(const std::string& path, nlohmann::json* descriptor = nullptr);

}  // namespace fewstep

#endif
