#pragma once

#include <memory>
#include <string>
#include <vector>

#include "phgmm/config.hpp"
#include "phgmm/nn.hpp"

namespace phgmm {

// Node ids of the four encoder levels: f1 at h/4 up to f4 at h/32.
struct PyramidNodes {
    int f1, f2, f3, f4;
};

// Residual encoder. Stem: 7x7 stride-2 convolution then 2x2 max pooling,
// reaching h/4; four residual stages follow, the last three at stride 2.
template <typename T>
class BackboneT {
public:
    BackboneT(const std::string& name, const ModelConfig& cfg, int in_channels,
              Rng& rng)
        : stem_(name + ".stem", in_channels, cfg.widths()[0], cfg.stem_kernel, 2,
                rng, false),
          stem_norm_(name + ".stem_norm", cfg.widths()[0]) {
        const auto widths = cfg.widths();
        int cin = widths[0];
        for (int s = 0; s < 4; ++s) {
            std::vector<std::unique_ptr<ResidualUnitT<T>>> stage;
            const int stride = s == 0 ? 1 : 2;
            const int dil = cfg.dilations[size_t(s)];
            for (int u = 0; u < cfg.units[size_t(s)]; ++u) {
                const std::string uname =
                    name + ".stage" + std::to_string(s + 1) + ".unit" + std::to_string(u);
                stage.push_back(std::make_unique<ResidualUnitT<T>>(
                    uname, u == 0 ? cin : widths[size_t(s)], widths[size_t(s)],
                    u == 0 ? stride : 1, rng, dil));
            }
            cin = widths[size_t(s)];
            stages_.push_back(std::move(stage));
        }
    }

    PyramidNodes forward(GraphT<T>& g, int image) {
        const auto& s = g.val(image).shape();
        if (s.size() != 3 || s[1] % 32 || s[2] % 32)
            throw shape_error("backbone: spatial dims must be divisible by 32, got " +
                              g.val(image).shape_str());
        int x = g.maxpool2(g.relu(stem_norm_.forward(g, stem_.forward(g, image))));
        PyramidNodes p{};
        int* out[4] = {&p.f1, &p.f2, &p.f3, &p.f4};
        for (int st = 0; st < 4; ++st) {
            for (auto& unit : stages_[size_t(st)]) x = unit->forward(g, x);
            *out[st] = x;
        }
        return p;
    }

    void collect(ParamList<T>& out) {
        stem_.collect(out);
        stem_norm_.collect(out);
        for (auto& stage : stages_)
            for (auto& unit : stage) unit->collect(out);
    }

private:
    Conv2dT<T> stem_;
    NormT<T> stem_norm_;
    std::vector<std::vector<std::unique_ptr<ResidualUnitT<T>>>> stages_;
};

}  // namespace phgmm
