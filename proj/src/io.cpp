#include "fewstep/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fewstep {

namespace {

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
    }
}

void atomic_write_text(const std::string& path, const std::string& text) {
    atomic_write_bytes(path, text);
}

void write_tensor(const std::string& path, const LatentTensor& tensor) {
    const Shape& s = tensor.shape();
    std::string bytes(static_cast<std::size_t>(tensor.size()) * sizeof(double), '\0');
    std::memcpy(bytes.data(), tensor.data(), bytes.size());
    atomic_write_bytes(path, bytes);

    nlohmann::json sidecar{{"shape", {s.t, s.h, s.w, s.c}},
                           {"dtype", "float64"},
                           {"layout", "row-major t,y,x,c"},
                           {"byte_order", "little-endian"}};
    write_json(path + ".json", sidecar);
}

LatentTensor read_tensor(const std::string& path) {
    const nlohmann::json sidecar = read_json(path + ".json");
    const auto dims = sidecar.at("shape");
    if (dims.size() != 4) throw std::runtime_error("read_tensor: sidecar shape must have 4 dims");
    Shape shape{dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>(), dims[3].get<int>()};
    const std::string bytes = read_file_bytes(path);
    if (bytes.size() != static_cast<std::size_t>(shape.total()) * sizeof(double)) {
        throw std::runtime_error("read_tensor: payload size does not match sidecar shape");
    }
    LatentTensor tensor(shape);
    std::memcpy(tensor.data(), bytes.data(), bytes.size());
    if (!tensor.all_finite()) throw std::runtime_error("read_tensor: non-finite entries");
    return tensor;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) {
            throw std::invalid_argument("write_csv: row width does not match header");
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_double(row[i]);
        }
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_csv_text(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) {
            throw std::invalid_argument("write_csv_text: row width does not match header");
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_json(const std::string& path, const nlohmann::json& j) {
    atomic_write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::string& path) {
    return nlohmann::json::parse(read_file_bytes(path));
}

namespace {
constexpr const char* kParamsMagic = "FEWSTEP_PARAMS v1";
}

void write_params(const std::string& path, const Eigen::VectorXd& params,
                  const nlohmann::json& descriptor) {
    nlohmann::json header = descriptor;
    header["count"] = params.size();
    std::string bytes = std::string(kParamsMagic) + "\n" + header.dump() + "\n";
    const std::size_t payload = static_cast<std::size_t>(params.size()) * sizeof(double);
    const std::size_t text_len = bytes.size();
    bytes.resize(text_len + payload);
    std::memcpy(bytes.data() + text_len, params.data(), payload);
    atomic_write_bytes(path, bytes);
}

Eigen::VectorXd read_params(const std::string& path, nlohmann::json* descriptor) {
    const std::string bytes = read_file_bytes(path);
    const std::size_t first_nl = bytes.find('\n');
    if (first_nl == std::string::npos || bytes.substr(0, first_nl) != kParamsMagic) {
        throw std::runtime_error("read_params: bad magic in " + path);
    }
    const std::size_t second_nl = bytes.find('\n', first_nl + 1);
    if (second_nl == std::string::npos) throw std::runtime_error("read_params: missing header");
    const nlohmann::json header =
        nlohmann::json::parse(bytes.substr(first_nl + 1, second_nl - first_nl - 1));
    const Eigen::Index count = header.at("count").get<Eigen::Index>();
    const std::size_t payload = bytes.size() - second_nl - 1;
    if (payload != static_cast<std::size_t>(count) * sizeof(double)) {
        throw std::runtime_error("read_params: payload size mismatch");
    }
    Eigen::VectorXd params(count);
    std::memcpy(params.data(), bytes.data() + second_nl + 1, payload);
    if (descriptor != nullptr) *descriptor = header;
    return params;
}

}  // namespace fewstep
