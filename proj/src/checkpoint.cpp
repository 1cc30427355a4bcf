#include "mogen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace mogen {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

namespace {

constexpr char kMagic[5] = {'M', 'O', 'G', 'D', '1'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    const uint8_t* p = reinterpret_cast<const uint8_t*>(&v);
    out.insert(out.end(), p, p + 4);
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    const uint8_t* p = reinterpret_cast<const uint8_t*>(&v);
    out.insert(out.end(), p, p + 8);
}

void put_str(std::vector<uint8_t>& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

void put_doubles(std::vector<uint8_t>& out, const double* d, size_t n) {
    const uint8_t* p = reinterpret_cast<const uint8_t*>(d);
    out.insert(out.end(), p, p + n * sizeof(double));
}

void put_tensor(std::vector<uint8_t>& out, const std::string& name,
                const std::vector<size_t>& shape, const std::vector<double>& data) {
    put_str(out, name);
    put_u32(out, static_cast<uint32_t>(shape.size()));
    for (size_t d : shape) put_u64(out, d);
    put_doubles(out, data.data(), data.size());
}

std::vector<uint8_t> weight_segment_bytes(const ParamList& params) {
    std::vector<uint8_t> out;
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) put_tensor(out, p.name, p.t.shape(), p.t.values());
    return out;
}

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw MogenError("load_checkpoint: truncated file " + path);
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, buf.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string str() {
        const uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
    std::vector<double> doubles(size_t n) {
        need(n * sizeof(double));
        std::vector<double> v(n);
        std::memcpy(v.data(), buf.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
        return v;
    }
};

struct RawTensor {
    std::vector<size_t> shape;
    std::vector<double> data;
};

using RawSegment = std::vector<std::pair<std::string, RawTensor>>;

RawSegment read_segment_tensors(Reader& r) {
    RawSegment seg;
    const uint32_t n_tensors = r.u32();
    for (uint32_t i = 0; i < n_tensors; ++i) {
        std::string name = r.str();
        const uint32_t ndim = r.u32();
        RawTensor t;
        size_t count = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            t.shape.push_back(static_cast<size_t>(r.u64()));
            count *= t.shape.back();
        }
        t.data = r.doubles(count);
        seg.emplace_back(std::move(name), std::move(t));
    }
    return seg;
}

}  // namespace

const char* stage_name(StageTag s) {
    switch (s) {
        case StageTag::pretrain: return "pretrain";
        case StageTag::rsa: return "rsa";
        case StageTag::amg: return "amg";
        case StageTag::amg_no_rsa: return "amg_no_rsa";
    }
    return "unknown";
}

std::vector<uint8_t> segment_bytes(const ModelWeights& w, const std::string& segment) {
    return weight_segment_bytes(w.params(segment));
}

void save_checkpoint(const std::string& path, const ModelWeights& w, StageTag stage,
                     const TrainerState* trainer) {
    std::vector<uint8_t> out(kMagic, kMagic + 5);
    put_u32(out, static_cast<uint32_t>(stage));
    const uint32_t n_segments = 1 + 4 + (trainer ? 1 : 0);
    put_u32(out, n_segments);

    put_str(out, "config");
    {
        std::vector<uint8_t> seg;
        put_u32(seg, 1);
        const auto cfg = w.cfg.to_doubles();
        put_tensor(seg, "cfg", {cfg.size()}, cfg);
        out.insert(out.end(), seg.begin(), seg.end());
    }
    for (const auto& name : ModelWeights::segment_names()) {
        put_str(out, name);
        const auto seg = weight_segment_bytes(w.params(name));
        out.insert(out.end(), seg.begin(), seg.end());
    }
    if (trainer) {
        put_str(out, "trainer");
        std::vector<uint8_t> seg;
        put_u32(seg, static_cast<uint32_t>(1 + 2 * trainer->slots.size()));
        put_tensor(seg, "step", {1}, {static_cast<double>(trainer->step)});
        for (const auto& s : trainer->slots) {
            put_tensor(seg, "m." + s.name, {s.m.size()}, s.m);
            put_tensor(seg, "v." + s.name, {s.v.size()}, s.v);
        }
        out.insert(out.end(), seg.begin(), seg.end());
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw MogenError("save_checkpoint: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw MogenError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MogenError("load_checkpoint: cannot open " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf, 0, path};

    r.need(5);
    if (std::memcmp(buf.data(), kMagic, 5) != 0)
        throw MogenError("load_checkpoint: bad magic in " + path);
    r.pos = 5;
    const uint32_t stage_raw = r.u32();
    if (stage_raw > 3) throw MogenError("load_checkpoint: unknown stage tag in " + path);
    const uint32_t n_segments = r.u32();

    std::map<std::string, RawSegment> segments;
    for (uint32_t i = 0; i < n_segments; ++i) {
        std::string name = r.str();
        segments[name] = read_segment_tensors(r);
    }

    auto cfg_it = segments.find("config");
    if (cfg_it == segments.end() || cfg_it->second.size() != 1)
        throw MogenError("load_checkpoint: missing config segment in " + path);
    const ModelConfig cfg = ModelConfig::from_doubles(cfg_it->second[0].second.data);

    Checkpoint ck;
    ck.stage = static_cast<StageTag>(stage_raw);
    ck.weights = ModelWeights::init(cfg, 0);
    for (const auto& seg_name : ModelWeights::segment_names()) {
        auto it = segments.find(seg_name);
        if (it == segments.end())
            throw MogenError("load_checkpoint: missing segment " + seg_name + " in " + path);
        std::map<std::string, const RawTensor*> by_name;
        for (const auto& [name, t] : it->second) by_name[name] = &t;
        for (auto& p : ck.weights.params(seg_name)) {
            auto found = by_name.find(p.name);
            if (found == by_name.end())
                throw MogenError("load_checkpoint: missing tensor " + p.name + " in " + path);
            if (found->second->shape != p.t.shape())
                throw MogenError("load_checkpoint: shape mismatch for " + p.name + " in " + path);
            std::copy(found->second->data.begin(), found->second->data.end(),
                      const_cast<Tensor&>(p.t).mutable_data());
        }
        if (by_name.size() != ck.weights.params(seg_name).size())
            throw MogenError("load_checkpoint: unexpected tensors in segment " + seg_name);
    }

    auto tr = segments.find("trainer");
    if (tr != segments.end()) {
        TrainerState st;
        for (const auto& [name, t] : tr->second) {
            if (name == "step") {
                st.step = static_cast<size_t>(t.data.at(0));
            } else if (name.rfind("m.", 0) == 0) {
                const std::string pname = name.substr(2);
                auto slot = std::find_if(st.slots.begin(), st.slots.end(),
                                         [&](const AdamSlot& s) { return s.name == pname; });
                if (slot == st.slots.end()) {
                    st.slots.push_back({pname, {}, {}});
                    slot = st.slots.end() - 1;
                }
                slot->m = t.data;
            } else if (name.rfind("v.", 0) == 0) {
                const std::string pname = name.substr(2);
                auto slot = std::find_if(st.slots.begin(), st.slots.end(),
                                         [&](const AdamSlot& s) { return s.name == pname; });
                if (slot == st.slots.end()) {
                    st.slots.push_back({pname, {}, {}});
                    slot = st.slots.end() - 1;
                }
                slot->v = t.data;
            }
        }
        ck.trainer = std::move(st);
    }
    return ck;
}

}  // namespace mogen
