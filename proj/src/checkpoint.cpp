#include "sketchgnn/errors.hpp"
#include "sketchgnn/model.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sketchgnn {

using nlohmann::json;

namespace {

const char* kModule = "model";
const char* kEncoding = "f64le-base64";

constexpr std::array<char, 64> kAlphabet = {
    'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O', 'P',
    'Q', 'R', 'S', 'T', 'U', 'V', 'W', 'X', 'Y', 'Z', 'a', 'b', 'c', 'd', 'e', 'f',
    'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r', 's', 't', 'u', 'v',
    'w', 'x', 'y', 'z', '0', '1', '2', '3', '4', '5', '6', '7', '8', '9', '+', '/'};

std::string base64_encode(const std::vector<unsigned char>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        const std::size_t left = bytes.size() - i;
        std::uint32_t chunk = static_cast<std::uint32_t>(bytes[i]) << 16;
        if (left > 1)
            chunk |= static_cast<std::uint32_t>(bytes[i + 1]) << 8;
        if (left > 2)
            chunk |= bytes[i + 2];
        out += kAlphabet[(chunk >> 18) & 63];
        out += kAlphabet[(chunk >> 12) & 63];
        out += left > 1 ? kAlphabet[(chunk >> 6) & 63] : '=';
        out += left > 2 ? kAlphabet[chunk & 63] : '=';
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    std::array<int, 256> lookup;
    lookup.fill(-1);
    for (std::size_t i = 0; i < kAlphabet.size(); ++i)
        lookup[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
    if (text.size() % 4 != 0)
        throw ParseError(kModule, "base64 payload length is not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        std::uint32_t chunk = 0;
        int pad = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            const char c = text[i + j];
            int v = 0;
            if (c == '=') {
                ++pad;
            } else {
                v = lookup[static_cast<unsigned char>(c)];
                if (v < 0 || pad > 0)
                    throw ParseError(kModule, "invalid base64 payload");
            }
            chunk = (chunk << 6) | static_cast<std::uint32_t>(v);
        }
        out.push_back(static_cast<unsigned char>(chunk >> 16));
        if (pad < 2)
            out.push_back(static_cast<unsigned char>(chunk >> 8));
        if (pad < 1)
            out.push_back(static_cast<unsigned char>(chunk));
    }
    return out;
}

std::string encode_doubles(std::span<const double> values) {
    std::vector<unsigned char> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto bits = std::bit_cast<std::uint64_t>(values[i]);
        for (std::size_t b = 0; b < 8; ++b)
            bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    return base64_encode(bytes);
}

std::vector<double> decode_doubles(const std::string& text) {
    const auto bytes = base64_decode(text);
    if (bytes.size() % 8 != 0)
        throw ParseError(kModule, "tensor payload is not a whole number of doubles");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        for (std::size_t b = 0; b < 8; ++b)
            bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

json config_to_json(const ModelConfig& c) {
    return {{"units_per_branch", c.units_per_branch},
            {"conv_width", c.conv_width},
            {"k", c.k},
            {"dilations", c.dilations},
            {"pool_width", c.pool_width},
            {"head_hidden", c.head_hidden},
            {"num_classes", c.num_classes},
            {"sample_points", c.sample_points}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.units_per_branch = j.at("units_per_branch").get<std::size_t>();
    c.conv_width = j.at("conv_width").get<std::size_t>();
    c.k = j.at("k").get<std::size_t>();
    c.dilations = j.at("dilations").get<std::vector<std::size_t>>();
    c.pool_width = j.at("pool_width").get<std::size_t>();
    c.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.sample_points = j.at("sample_points").get<std::size_t>();
    c.validate();
    return c;
}

} // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
    json meta = config_to_json(ckpt.config);
    meta["seed"] = ckpt.seed;
    meta["category"] = ckpt.category;
    meta["classes"] = ckpt.classes;
    if (ckpt.epoch)
        meta["epoch"] = *ckpt.epoch;

    // Parameter order is part of the format; nlohmann::ordered_json keeps it.
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < ckpt.params.size(); ++k) {
        const Tensor& t = ckpt.params.tensors()[k];
        params[ckpt.params.names()[k]] = {
            {"shape", t.shape()}, {"encoding", kEncoding}, {"data", encode_doubles(t.data())}};
    }
    nlohmann::ordered_json doc;
    doc["meta"] = nlohmann::ordered_json::parse(meta.dump());
    doc["params"] = std::move(params);
    return doc.dump();
}

Checkpoint checkpoint_from_json(std::string_view text) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(text.begin(), text.end());
    } catch (const nlohmann::ordered_json::parse_error& e) {
        throw ParseError(kModule, std::string("malformed checkpoint: ") + e.what());
    }
    try {
        Checkpoint ckpt;
        const json meta = json::parse(doc.at("meta").dump());
        ckpt.config = config_from_json(meta);
        ckpt.seed = meta.value("seed", std::uint64_t{0});
        ckpt.category = meta.value("category", std::string{});
        ckpt.classes = meta.value("classes", std::vector<std::string>{});
        if (meta.contains("epoch"))
            ckpt.epoch = meta.at("epoch").get<std::size_t>();

        const ModelParams expected = zero_params(ckpt.config);
        const auto& params = doc.at("params");
        for (std::size_t k = 0; k < expected.size(); ++k) {
            const std::string& name = expected.names()[k];
            if (!params.contains(name))
                throw ValidationError(kModule, "checkpoint is missing parameter " + name);
            const auto& entry = params.at(name);
            Shape shape = entry.at("shape").get<Shape>();
            std::vector<double> data;
            // Plain number lists are accepted as well as the packed encoding.
            if (entry.at("data").is_string())
                data = decode_doubles(entry.at("data").get<std::string>());
            else
                data = entry.at("data").get<std::vector<double>>();
            if (shape != expected.tensors()[k].shape())
                throw ValidationError(kModule, "parameter " + name + " has shape " +
                                                   shape_string(shape) + ", config implies " +
                                                   shape_string(expected.tensors()[k].shape()));
            ckpt.params.add(name, Tensor(std::move(shape), std::move(data)));
        }
        if (params.size() != expected.size())
            throw ValidationError(kModule, "checkpoint has unexpected extra parameters");
        return ckpt;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ParseError(kModule, std::string("bad checkpoint layout: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InvalidArgument(kModule, "cannot write " + path);
    out << checkpoint_to_json(ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidArgument(kModule, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

} // namespace sketchgnn
