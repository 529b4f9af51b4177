#include "adc/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>

namespace adc {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    assert(a.h == b.h && a.w == b.w);
    Tensor out(a.c + b.c, a.h, a.w);
    std::memcpy(out.data.data(), a.data.data(), a.size() * sizeof(float));
    std::memcpy(out.data.data() + a.size(), b.data.data(), b.size() * sizeof(float));
    return out;
}

void split_channels(const Tensor& dy, int c_first, Tensor& da, Tensor& db) {
    assert(dy.c > c_first);
    da = Tensor(c_first, dy.h, dy.w);
    db = Tensor(dy.c - c_first, dy.h, dy.w);
    std::memcpy(da.data.data(), dy.data.data(), da.size() * sizeof(float));
    std::memcpy(db.data.data(), dy.data.data() + da.size(), db.size() * sizeof(float));
}

}  // namespace adc
