#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabllm/autograd.hpp"
#include "tabllm/error.hpp"
#include "tabllm/tensor.hpp"

namespace tabllm {

// Weight container: little-endian, 8-byte magic, u64 length-prefixed JSON
// header {"config": ..., "tensors": [{name, dtype, shape, byte_offset}]},
// then concatenated row-major float32 payloads.

inline constexpr char kWeightMagic[8] = {'T', 'L', 'L', 'M', 'W', '0', '0', '1'};

template <typename Real>
inline void save_tensor_container(const std::vector<const Parameter<Real>*>& tensors,
                                  const nlohmann::json& config, const std::string& path) {
    nlohmann::json table = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto* p : tensors) {
        table.push_back({{"name", p->name},
                         {"dtype", "f32"},
                         {"shape", p->value.shape},
                         {"byte_offset", offset}});
        offset += p->value.size() * sizeof(float);
    }
    nlohmann::json header = {{"config", config}, {"tensors", table}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::io_failure, "cannot write " + path);
    out.write(kWeightMagic, 8);
    uint64_t hlen = header_str.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(header_str.data(), static_cast<std::streamsize>(hlen));
    for (const auto* p : tensors) {
        for (Real x : p->value.v) {
            float f = static_cast<float>(x);
            out.write(reinterpret_cast<const char*>(&f), sizeof(float));
        }
    }
    if (!out) fail(errc::io_failure, "write failed for " + path);
}

struct ContainerEntry {
    std::vector<size_t> shape;
    uint64_t byte_offset = 0;
};

struct ContainerHeader {
    nlohmann::json config;
    std::map<std::string, ContainerEntry> tensors;
    std::streampos payload_start = 0;
};

inline ContainerHeader read_container_header(std::ifstream& in, const std::string& path) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kWeightMagic, 8) != 0)
        fail(errc::truncated_file, "bad magic in " + path);
    uint64_t hlen = 0;
    if (!in.read(reinterpret_cast<char*>(&hlen), 8))
        fail(errc::truncated_file, "missing header in " + path);
    std::string header_str(hlen, '\0');
    if (!in.read(header_str.data(), static_cast<std::streamsize>(hlen)))
        fail(errc::truncated_file, "truncated header in " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        fail(errc::truncated_file, std::string("bad header json: ") + e.what());
    }
    ContainerHeader out;
    if (header.contains("config")) out.config = header.at("config");
    for (const auto& t : header.at("tensors")) {
        ContainerEntry e;
        e.shape = t.at("shape").get<std::vector<size_t>>();
        e.byte_offset = t.at("byte_offset").get<uint64_t>();
        if (t.at("dtype").get<std::string>() != "f32")
            fail(errc::shape_table_mismatch, "unsupported dtype in " + path);
        out.tensors.emplace(t.at("name").get<std::string>(), std::move(e));
    }
    out.payload_start = in.tellg();
    return out;
}

template <typename Real>
inline void read_container_payload(std::ifstream& in, const ContainerHeader& header,
                                   const std::string& name, Tensor<Real>& dst) {
    const ContainerEntry& e = header.tensors.at(name);
    in.seekg(header.payload_start + static_cast<std::streamoff>(e.byte_offset));
    for (auto& x : dst.v) {
        float f;
        if (!in.read(reinterpret_cast<char*>(&f), sizeof(float)))
            fail(errc::truncated_file, "truncated payload at tensor '" + name + "'");
        x = static_cast<Real>(f);
    }
}

// Strict load: file tensors and expected parameters must match exactly in
// name set and shapes.
template <typename Real>
inline nlohmann::json load_tensor_container(const std::vector<Parameter<Real>*>& tensors,
                                            const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_failure, "cannot open " + path);
    ContainerHeader header = read_container_header(in, path);

    std::map<std::string, Parameter<Real>*> by_name;
    for (auto* p : tensors) by_name[p->name] = p;
    for (const auto& [name, entry] : header.tensors)
        if (!by_name.count(name))
            fail(errc::unknown_tensor_name, "unexpected tensor '" + name + "'");
    for (const auto& [name, p] : by_name) {
        auto it = header.tensors.find(name);
        if (it == header.tensors.end())
            fail(errc::shape_table_mismatch, "missing tensor '" + name + "'");
        if (it->second.shape != p->value.shape)
            fail(errc::shape_table_mismatch, "shape mismatch for tensor '" + name + "'");
    }
    for (auto* p : tensors) read_container_payload(in, header, p->name, p->value);
    return header.config;
}

}  // namespace tabllm
