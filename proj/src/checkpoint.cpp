#include "sfmap/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace sfmap {

namespace {
constexpr char kMagic[4] = {'S', 'F', 'C', 'K'};
}

Checkpoint Checkpoint::capture(const RunConfig& cfg, DualBranchField& field,
                               nn::AdamOptimizer& opt) {
    Checkpoint ck;
    ck.config_text = cfg.to_json_text();
    ck.bounds = field.bounds();
    ck.adam_step_count = opt.step_count();
    auto params = field.named_parameters();
    if (opt.num_params() != params.size())
        throw ContractError("checkpoint: optimizer does not cover the field's parameters");
    for (size_t i = 0; i < params.size(); ++i) {
        Entry e;
        e.name = params[i].name;
        e.shape = params[i].tensor.shape();
        e.values = params[i].tensor.values();
        e.m = opt.first_moment(i);
        e.v = opt.second_moment(i);
        ck.entries.push_back(std::move(e));
    }
    return ck;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write '" + path + "'");
    out.write(kMagic, 4);
    detail::put_u8(out, kVersion);
    detail::put_u32(out, uint32_t(config_text.size()));
    out.write(config_text.data(), std::streamsize(config_text.size()));
    detail::put_f64(out, bounds.lo.x);
    detail::put_f64(out, bounds.lo.y);
    detail::put_f64(out, bounds.lo.z);
    detail::put_f64(out, bounds.hi.x);
    detail::put_f64(out, bounds.hi.y);
    detail::put_f64(out, bounds.hi.z);
    detail::put_u64(out, uint64_t(adam_step_count));
    detail::put_u32(out, uint32_t(entries.size()));
    for (const Entry& e : entries) {
        detail::put_u32(out, uint32_t(e.name.size()));
        out.write(e.name.data(), std::streamsize(e.name.size()));
        detail::put_u32(out, uint32_t(e.shape.size()));
        for (int d : e.shape) detail::put_u32(out, uint32_t(d));
        detail::put_u32(out, uint32_t(e.values.size()));
        for (float v : e.values) detail::put_f32(out, v);
        for (float v : e.m) detail::put_f32(out, v);
        for (float v : e.v) detail::put_f32(out, v);
    }
    if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    auto corrupt = [&path](const char* what) {
        return IoError(std::string("checkpoint: corrupt file '") + path + "' (" + what + ")");
    };

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw corrupt("bad magic");
    uint8_t version;
    if (!detail::get_u8(in, version)) throw corrupt("missing version");
    if (version != kVersion) {
        std::ostringstream ss;
        ss << "checkpoint: version " << int(version) << " in '" << path
           << "' does not match supported version " << int(kVersion);
        throw IoError(ss.str());
    }

    Checkpoint ck;
    uint32_t cfg_len;
    if (!detail::get_u32(in, cfg_len)) throw corrupt("config length");
    ck.config_text.resize(cfg_len);
    if (!in.read(ck.config_text.data(), std::streamsize(cfg_len))) throw corrupt("config text");
    if (!detail::get_f64(in, ck.bounds.lo.x) || !detail::get_f64(in, ck.bounds.lo.y) ||
        !detail::get_f64(in, ck.bounds.lo.z) || !detail::get_f64(in, ck.bounds.hi.x) ||
        !detail::get_f64(in, ck.bounds.hi.y) || !detail::get_f64(in, ck.bounds.hi.z))
        throw corrupt("bounds");
    uint64_t sc;
    if (!detail::get_u64(in, sc)) throw corrupt("step count");
    ck.adam_step_count = int64_t(sc);
    uint32_t n_entries;
    if (!detail::get_u32(in, n_entries)) throw corrupt("entry count");
    for (uint32_t i = 0; i < n_entries; ++i) {
        Entry e;
        uint32_t name_len;
        if (!detail::get_u32(in, name_len) || name_len > 4096) throw corrupt("entry name");
        e.name.resize(name_len);
        if (!in.read(e.name.data(), std::streamsize(name_len))) throw corrupt("entry name");
        uint32_t ndim;
        if (!detail::get_u32(in, ndim) || ndim > 8) throw corrupt("entry rank");
        int64_t numel = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            uint32_t dim;
            if (!detail::get_u32(in, dim)) throw corrupt("entry shape");
            e.shape.push_back(int(dim));
            numel *= dim;
        }
        uint32_t count;
        if (!detail::get_u32(in, count)) throw corrupt("entry size");
        if (int64_t(count) != numel) throw corrupt("entry size does not match shape");
        e.values.resize(count);
        e.m.resize(count);
        e.v.resize(count);
        for (auto* arr : {&e.values, &e.m, &e.v})
            for (float& v : *arr)
                if (!detail::get_f32(in, v)) throw corrupt("entry data");
        ck.entries.push_back(std::move(e));
    }
    return ck;
}

DualBranchField Checkpoint::restore_field() const {
    RunConfig cfg = config();
    Rng rng(0);
    DualBranchField field = DualBranchField::create(cfg.field, bounds, rng);
    auto params = field.named_parameters();
    if (params.size() != entries.size()) {
        std::ostringstream ss;
        ss << "checkpoint: " << entries.size() << " tensors but the config's field has "
           << params.size() << " (hyperparameter mismatch)";
        throw IoError(ss.str());
    }
    for (size_t i = 0; i < params.size(); ++i) {
        const Entry& e = entries[i];
        if (e.name != params[i].name || e.shape != params[i].tensor.shape()) {
            std::ostringstream ss;
            ss << "checkpoint: tensor '" << e.name << "' does not match the config's '"
               << params[i].name << "' (hyperparameter mismatch)";
            throw IoError(ss.str());
        }
        params[i].tensor.values() = e.values;
    }
    return field;
}

void Checkpoint::restore_optimizer(nn::AdamOptimizer& opt) const {
    if (opt.num_params() != entries.size())
        throw ContractError("checkpoint: optimizer slot count mismatch");
    for (size_t i = 0; i < entries.size(); ++i) {
        if (opt.first_moment(i).size() != entries[i].m.size())
            throw ContractError("checkpoint: moment size mismatch");
        opt.first_moment(i) = entries[i].m;
        opt.second_moment(i) = entries[i].v;
    }
    opt.set_step_count(adam_step_count);
}

}  // namespace sfmap
