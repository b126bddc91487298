#include "sdd/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "sdd/errors.hpp"

namespace sdd {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'D', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint serializer assumes a little-endian host");

struct Writer {
    std::vector<unsigned char> buf;

    template <typename T>
    void put(T v) {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        buf.insert(buf.end(), raw, raw + sizeof(T));
    }
};

struct Reader {
    const unsigned char* p;
    const unsigned char* end;

    template <typename T>
    T get() {
        if (p + sizeof(T) > end) throw CorruptError("checkpoint truncated");
        T v;
        std::memcpy(&v, p, sizeof(T));
        p += sizeof(T);
        return v;
    }
};

}  // namespace

void save_checkpoint(const NetworkModel& model, const std::string& path) {
    model.validate();
    Writer w;
    w.buf.insert(w.buf.end(), kMagic, kMagic + 4);
    w.put<uint32_t>(model.input.C);
    w.put<uint32_t>(model.input.H);
    w.put<uint32_t>(model.input.W);
    w.put<uint32_t>(static_cast<uint32_t>(model.layers.size()));
    for (const auto& l : model.layers) {
        w.put<uint8_t>(static_cast<uint8_t>(l.kind));
        switch (l.kind) {
            case LayerKind::pool:
                w.put<uint32_t>(l.pool_k);
                break;
            case LayerKind::flatten:
                break;
            case LayerKind::dense:
                w.put<uint32_t>(l.in);
                w.put<uint32_t>(l.out);
                w.put<double>(l.neuron.threshold);
                w.put<double>(l.neuron.current_decay);
                w.put<double>(l.neuron.voltage_decay);
                w.put<double>(l.neuron.tau_grad);
                w.put<double>(l.neuron.scale_grad);
                w.put<uint8_t>(l.neuron.mode == LifMode::cuba ? 1 : 0);
                w.put<double>(l.dropout_p);
                break;
        }
    }
    for (const auto& mat : model.weights) {
        for (float v : mat) w.put<float>(v);
    }
    uint32_t crc = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(w.buf.data()), static_cast<uInt>(w.buf.size())));
    w.put<uint32_t>(crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(w.buf.data()), w.buf.size());
    if (!out) throw IoError("write failed: " + path);
}

NetworkModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw CorruptError("not a SDD1 checkpoint: " + path);
    }
    const size_t payload = buf.size() - 4;
    uint32_t stored;
    std::memcpy(&stored, buf.data() + payload, 4);
    uint32_t actual = static_cast<uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(payload)));
    if (stored != actual) throw CorruptError("checkpoint CRC mismatch: " + path);

    Reader r{buf.data() + 4, buf.data() + payload};
    NetworkModel m;
    m.input.C = static_cast<int>(r.get<uint32_t>());
    m.input.H = static_cast<int>(r.get<uint32_t>());
    m.input.W = static_cast<int>(r.get<uint32_t>());
    uint32_t n_layers = r.get<uint32_t>();
    for (uint32_t i = 0; i < n_layers; ++i) {
        LayerSpec l;
        uint8_t kind = r.get<uint8_t>();
        if (kind > 2) throw CorruptError("unknown layer kind in checkpoint");
        l.kind = static_cast<LayerKind>(kind);
        switch (l.kind) {
            case LayerKind::pool:
                l.pool_k = static_cast<int>(r.get<uint32_t>());
                break;
            case LayerKind::flatten:
                break;
            case LayerKind::dense:
                l.in = static_cast<int>(r.get<uint32_t>());
                l.out = static_cast<int>(r.get<uint32_t>());
                l.neuron.threshold = r.get<double>();
                l.neuron.current_decay = r.get<double>();
                l.neuron.voltage_decay = r.get<double>();
                l.neuron.tau_grad = r.get<double>();
                l.neuron.scale_grad = r.get<double>();
                l.neuron.mode = r.get<uint8_t>() ? LifMode::cuba : LifMode::single;
                l.dropout_p = r.get<double>();
                break;
        }
        m.layers.push_back(l);
    }
    for (const auto& l : m.layers) {
        if (l.kind != LayerKind::dense) continue;
        std::vector<float> mat(static_cast<size_t>(l.in) * l.out);
        for (auto& v : mat) v = r.get<float>();
        m.weights.push_back(std::move(mat));
    }
    if (r.p != r.end) throw CorruptError("trailing bytes in checkpoint");
    try {
        m.validate();
    } catch (const std::exception& e) {
        throw CorruptError(std::string("checkpoint fails model validation: ") + e.what());
    }
    return m;
}

}  // namespace sdd
