#include "core/index.hpp"

#include <sstream>
#include <string>
#include <unordered_map>

#include "core/error.hpp"

namespace steadapt::idx {

namespace {

template <class V>
std::shared_ptr<const V> cached(const std::string& key, V (*build)(const std::string&)) {
    // Single training thread; plain map cache.
    thread_local std::unordered_map<std::string, std::shared_ptr<const V>> cache;
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto v = std::make_shared<const V>(build(key));
    cache.emplace(key, v);
    return v;
}

using I32 = std::vector<std::int32_t>;

std::string key(const char* tag, std::initializer_list<int> args) {
    std::ostringstream os;
    os << tag;
    for (int a : args) os << ':' << a;
    return os.str();
}

struct Args {
    int v[8];
};

Args parse(const std::string& k) {
    Args a{};
    size_t pos = k.find(':');
    int i = 0;
    while (pos != std::string::npos && i < 8) {
        size_t next = k.find(':', pos + 1);
        a.v[i++] = std::stoi(k.substr(pos + 1, next - pos - 1));
        pos = next;
    }
    return a;
}

I32 build_bchw_to_bnc(const std::string& k) {
    auto [v] = parse(k);
    const int B = v[0], C = v[1], H = v[2], W = v[3];
    I32 out(static_cast<size_t>(B) * C * H * W);
    std::int32_t* o = out.data();
    for (int b = 0; b < B; ++b)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < C; ++c)
                    *o++ = static_cast<std::int32_t>(((b * C + c) * H + y) * W + x);
    return out;
}

I32 build_bnc_to_bchw(const std::string& k) {
    auto [v] = parse(k);
    const int B = v[0], C = v[1], H = v[2], W = v[3];
    const int N = H * W;
    I32 out(static_cast<size_t>(B) * C * H * W);
    std::int32_t* o = out.data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    *o++ = static_cast<std::int32_t>((b * N + y * W + x) * C + c);
    return out;
}

I32 build_window_qkv(const std::string& k) {
    auto [v] = parse(k);
    const int B = v[0], H = v[1], W = v[2], D = v[3], heads = v[4], ws = v[5], shift = v[6],
              part = v[7];
    const int hd = D / heads;
    const int nwy = H / ws, nwx = W / ws;
    const int N = H * W;
    I32 out(static_cast<size_t>(B) * nwy * nwx * heads * ws * ws * hd);
    std::int32_t* o = out.data();
    for (int b = 0; b < B; ++b)
        for (int wy = 0; wy < nwy; ++wy)
            for (int wx = 0; wx < nwx; ++wx)
                for (int hh = 0; hh < heads; ++hh)
                    for (int iy = 0; iy < ws; ++iy)
                        for (int ix = 0; ix < ws; ++ix) {
                            // rolled position -> source token
                            const int y = (wy * ws + iy + shift) % H;
                            const int x = (wx * ws + ix + shift) % W;
                            const std::int64_t row =
                                static_cast<std::int64_t>(b) * N + y * W + x;
                            for (int e = 0; e < hd; ++e) {
                                const int c = part * D + hh * hd + e;
                                *o++ = static_cast<std::int32_t>(row * 3 * D + c);
                            }
                        }
    return out;
}

I32 build_window_merge(const std::string& k) {
    auto [v] = parse(k);
    const int B = v[0], H = v[1], W = v[2], D = v[3], heads = v[4], ws = v[5], shift = v[6];
    const int hd = D / heads;
    const int nwy = H / ws, nwx = W / ws;
    const int R = ws * ws;
    I32 out(static_cast<size_t>(B) * H * W * D);
    std::int32_t* o = out.data();
    for (int b = 0; b < B; ++b)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const int ys = (y - shift + H) % H;
                const int xs = (x - shift + W) % W;
                const int wy = ys / ws, iy = ys % ws;
                const int wx = xs / ws, ix = xs % ws;
                const int widx = wy * nwx + wx;
                for (int c = 0; c < D; ++c) {
                    const int hh = c / hd, e = c % hd;
                    const std::int64_t g =
                        (static_cast<std::int64_t>(b) * nwy * nwx + widx) * heads + hh;
                    *o++ = static_cast<std::int32_t>((g * R + iy * ws + ix) * hd + e);
                }
            }
    return out;
}

I32 build_pad_reflect_br(const std::string& k) {
    auto [v] = parse(k);
    const int B = v[0], C = v[1], H = v[2], W = v[3], ph = v[4], pw = v[5];
    const int Hp = H + ph, Wp = W + pw;
    I32 out(static_cast<size_t>(B) * C * Hp * Wp);
    std::int32_t* o = out.data();
    for (int bc = 0; bc < B * C; ++bc)
        for (int y = 0; y < Hp; ++y) {
            const int sy = y < H ? y : 2 * H - 2 - y;
            for (int x = 0; x < Wp; ++x) {
                const int sx = x < W ? x : 2 * W - 2 - x;
                *o++ = static_cast<std::int32_t>((static_cast<std::int64_t>(bc) * H + sy) * W + sx);
            }
        }
    return out;
}

I32 build_crop_tl(const std::string& k) {
    auto [v] = parse(k);
    const int B = v[0], C = v[1], Hp = v[2], Wp = v[3], H = v[4], W = v[5];
    I32 out(static_cast<size_t>(B) * C * H * W);
    std::int32_t* o = out.data();
    for (int bc = 0; bc < B * C; ++bc)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                *o++ = static_cast<std::int32_t>((static_cast<std::int64_t>(bc) * Hp + y) * Wp + x);
    return out;
}

I32 build_pixel_shuffle(const std::string& k) {
    auto [v] = parse(k);
    const int B = v[0], C = v[1], r = v[2], H = v[3], W = v[4];
    const int Cin = C * r * r;
    I32 out(static_cast<size_t>(B) * C * r * r * H * W);
    std::int32_t* o = out.data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int yo = 0; yo < H * r; ++yo)
                for (int xo = 0; xo < W * r; ++xo) {
                    const int y = yo / r, dy = yo % r;
                    const int x = xo / r, dx = xo % r;
                    const int ci = (c * r + dy) * r + dx;
                    *o++ = static_cast<std::int32_t>(
                        ((static_cast<std::int64_t>(b) * Cin + ci) * H + y) * W + x);
                }
    return out;
}

I32 build_rel_bias(const std::string& k) {
    auto [v] = parse(k);
    const int heads = v[0], ws = v[1];
    const int R = ws * ws;
    const int span = 2 * ws - 1;
    I32 out(static_cast<size_t>(heads) * R * R);
    std::int32_t* o = out.data();
    for (int h = 0; h < heads; ++h)
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < R; ++j) {
                const int ry = i / ws - j / ws + ws - 1;
                const int rx = i % ws - j % ws + ws - 1;
                *o++ = static_cast<std::int32_t>((ry * span + rx) * heads + h);
            }
    return out;
}

std::vector<std::int8_t> build_shift_mask(const std::string& k) {
    auto [v] = parse(k);
    const int H = v[0], W = v[1], ws = v[2], s = v[3];
    const int nwy = H / ws, nwx = W / ws;
    const int R = ws * ws;
    auto region = [ws, s](int coord, int extent) {
        if (coord < extent - ws) return 0;
        if (coord < extent - s) return 1;
        return 2;
    };
    std::vector<std::int8_t> out(static_cast<size_t>(nwy) * nwx * R * R);
    std::int8_t* o = out.data();
    for (int wy = 0; wy < nwy; ++wy)
        for (int wx = 0; wx < nwx; ++wx) {
            int reg[64 * 64];
            for (int iy = 0; iy < ws; ++iy)
                for (int ix = 0; ix < ws; ++ix)
                    reg[iy * ws + ix] =
                        region(wy * ws + iy, H) * 3 + region(wx * ws + ix, W);
            for (int i = 0; i < R; ++i)
                for (int j = 0; j < R; ++j) *o++ = reg[i] == reg[j] ? 1 : 0;
        }
    return out;
}

}  // namespace

IndexVec bchw_to_bnc(int b, int c, int h, int w) {
    return cached(key("bnc", {b, c, h, w}), build_bchw_to_bnc);
}
IndexVec bnc_to_bchw(int b, int c, int h, int w) {
    return cached(key("bchw", {b, c, h, w}), build_bnc_to_bchw);
}
IndexVec window_qkv(int b, int h, int w, int d, int heads, int ws, int shift, int part) {
    return cached(key("wqkv", {b, h, w, d, heads, ws, shift, part}), build_window_qkv);
}
IndexVec window_merge(int b, int h, int w, int d, int heads, int ws, int shift) {
    return cached(key("wmrg", {b, h, w, d, heads, ws, shift}), build_window_merge);
}
IndexVec pad_reflect_br(int b, int c, int h, int w, int ph, int pw) {
    if (ph >= h || pw >= w)
        throw InvalidShape("reflect pad " + std::to_string(ph) + "x" + std::to_string(pw) +
                           " too large for " + std::to_string(h) + "x" + std::to_string(w));
    return cached(key("padr", {b, c, h, w, ph, pw}), build_pad_reflect_br);
}
IndexVec crop_tl(int b, int c, int hp, int wp, int h, int w) {
    return cached(key("crop", {b, c, hp, wp, h, w}), build_crop_tl);
}
IndexVec pixel_shuffle(int b, int c_out, int r, int h, int w) {
    return cached(key("pxsh", {b, c_out, r, h, w}), build_pixel_shuffle);
}
IndexVec rel_bias(int heads, int ws) { return cached(key("rbia", {heads, ws}), build_rel_bias); }
MaskVec shift_mask(int h, int w, int ws, int shift) {
    if (ws > 64) throw InvalidConfig("window_size > 64 unsupported");
    return cached(key("mask", {h, w, ws, shift}), build_shift_mask);
}

}  // namespace steadapt::idx
