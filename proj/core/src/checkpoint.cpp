#include "hazebridge/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace hazebridge {

namespace {

constexpr char kMagic[4] = {'H', 'B', 'T', 'C'};
constexpr uint8_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is, const std::string& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint: truncated file " + path);
    return v;
}

}  // namespace

void save_tensor_container(const std::string& path, const std::vector<NamedTensor>& items) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 4);
    write_pod<uint8_t>(os, kVersion);
    write_pod<uint32_t>(os, static_cast<uint32_t>(items.size()));
    for (const auto& item : items) {
        if (item.name.size() > 0xffff) throw IoError("checkpoint: name too long: " + item.name);
        write_pod<uint16_t>(os, static_cast<uint16_t>(item.name.size()));
        os.write(item.name.data(), static_cast<std::streamsize>(item.name.size()));
        write_pod<uint8_t>(os, 0);  // dtype: float64
        const auto& shape = item.tensor.shape();
        write_pod<uint8_t>(os, static_cast<uint8_t>(shape.size()));
        for (int64_t e : shape) write_pod<int64_t>(os, e);
        for (real v : item.tensor.data()) write_pod<double>(os, static_cast<double>(v));
    }
    if (!os) throw IoError("checkpoint: write failed for " + path);
}

std::vector<NamedTensor> load_tensor_container(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint: bad magic in " + path);
    const auto version = read_pod<uint8_t>(is, path);
    if (version != kVersion)
        throw IoError("checkpoint: unsupported format version " + std::to_string(version) +
                      " in " + path);
    const auto count = read_pod<uint32_t>(is, path);
    std::vector<NamedTensor> items;
    items.reserve(count);
    for (uint32_t k = 0; k < count; ++k) {
        const auto name_len = read_pod<uint16_t>(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw IoError("checkpoint: truncated file " + path);
        const auto dtype = read_pod<uint8_t>(is, path);
        if (dtype != 0) throw IoError("checkpoint: unknown dtype in " + path);
        const auto rank = read_pod<uint8_t>(is, path);
        Shape shape(rank);
        for (auto& e : shape) e = read_pod<int64_t>(is, path);
        const int64_t n = shape_numel(shape);
        std::vector<real> data(n);
        for (int64_t i = 0; i < n; ++i) data[i] = static_cast<real>(read_pod<double>(is, path));
        items.push_back({std::move(name), Tensor::from_data(shape, std::move(data))});
    }
    return items;
}

const Tensor& find_tensor(const std::vector<NamedTensor>& items, const std::string& name) {
    for (const auto& item : items)
        if (item.name == name) return item.tensor;
    throw IoError("checkpoint: missing tensor '" + name + "'");
}

void assign_tensor(Tensor& dst, const Tensor& src) {
    if (dst.shape() != src.shape())
        throw IoError("checkpoint: shape mismatch, expected " + shape_str(dst.shape()) +
                      " got " + shape_str(src.shape()));
    auto d = dst.mutable_data();
    auto s = src.data();
    std::copy(s.begin(), s.end(), d.begin());
}

}  // namespace hazebridge
