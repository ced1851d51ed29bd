#include "omnitrack/dssm.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace omnitrack {

namespace {

void require_shape(const FeatureMap& a, const FeatureMap& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// depthwise 3x3 convolution with zero padding; kernel is 9 doubles per channel
FeatureMap depthwise_conv3x3(const FeatureMap& in, const std::vector<double>& kernel) {
    FeatureMap out(in.b, in.c, in.w, in.h);
    for (int bi = 0; bi < in.b; ++bi) {
        for (int ci = 0; ci < in.c; ++ci) {
            const double* k = kernel.data() + static_cast<std::size_t>(ci) * 9;
            for (int x = 0; x < in.w; ++x) {
                for (int y = 0; y < in.h; ++y) {
                    double acc = 0.0;
                    for (int dx = -1; dx <= 1; ++dx) {
                        for (int dy = -1; dy <= 1; ++dy) {
                            const int xx = x + dx, yy = y + dy;
                            if (xx < 0 || xx >= in.w || yy < 0 || yy >= in.h) continue;
                            acc += k[(dx + 1) * 3 + (dy + 1)] * in.at(bi, ci, xx, yy);
                        }
                    }
                    out.at(bi, ci, x, y) = acc;
                }
            }
        }
    }
    return out;
}

FeatureMap conv3x3_fixed(const FeatureMap& in, const double k[9]) {
    std::vector<double> per_channel(static_cast<std::size_t>(in.c) * 9);
    for (int ci = 0; ci < in.c; ++ci)
        for (int i = 0; i < 9; ++i)
            per_channel[static_cast<std::size_t>(ci) * 9 + i] = k[i];
    return depthwise_conv3x3(in, per_channel);
}

// 1x1 channel mix: out[c] = sum_c' M[c][c'] in[c']
FeatureMap channel_mix(const FeatureMap& in, const std::vector<double>& m,
                       int out_channels) {
    FeatureMap out(in.b, out_channels, in.w, in.h);
    for (int bi = 0; bi < in.b; ++bi)
        for (int co = 0; co < out_channels; ++co)
            for (int ci = 0; ci < in.c; ++ci) {
                const double weight = m[static_cast<std::size_t>(co) * in.c + ci];
                if (weight == 0.0) continue;
                for (int x = 0; x < in.w; ++x)
                    for (int y = 0; y < in.h; ++y)
                        out.at(bi, co, x, y) += weight * in.at(bi, ci, x, y);
            }
    return out;
}

std::vector<double> identity_matrix(int n) {
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i) * n + i] = 1.0;
    return m;
}

}  // namespace

void DssmParams::validate() const {
    if (channels < 1) throw std::invalid_argument("DssmParams: channels must be >= 1");
    if (n_scans != 1 && n_scans != 2 && n_scans != 4)
        throw std::invalid_argument("DssmParams: n_scans must be 1, 2 or 4");
    if (dssm_target < 3 || dssm_target > 5)
        throw std::invalid_argument("DssmParams: dssm_target must be 3, 4 or 5");
    const auto c9 = static_cast<std::size_t>(channels) * 9;
    if (distortion_kernel.size() != c9 || scale_kernel.size() != c9)
        throw std::invalid_argument("DssmParams: depthwise kernel size mismatch");
    if (dyn_gates.empty() || dyn_kernels.size() != dyn_gates.size() * 9)
        throw std::invalid_argument("DssmParams: dynamic kernel bank size mismatch");
    if (ssm.size() != static_cast<std::size_t>(channels))
        throw std::invalid_argument("DssmParams: ssm coefficient count mismatch");
    const auto cc = static_cast<std::size_t>(channels) * channels;
    if (residual_mix.size() != cc || fusion_mix.size() != cc)
        throw std::invalid_argument("DssmParams: mix matrix size mismatch");
}

DssmParams DssmParams::identity(int channels, int s3_channels, int s5_channels) {
    DssmParams p;
    p.channels = channels;
    p.s3_channels = s3_channels;
    p.s5_channels = s5_channels;
    p.distortion_kernel.assign(static_cast<std::size_t>(channels) * 9, 0.0);
    p.scale_kernel.assign(static_cast<std::size_t>(channels) * 9, 0.0);
    p.dyn_kernels.assign(9, 0.0);
    p.dyn_kernels[4] = 1.0;  // single identity candidate
    p.dyn_gates.assign(1, 0.0);
    p.ssm.assign(channels, SsmCoeffs{0.5, 1.0, 0.0});  // c = 0: scan contributes nothing
    p.residual_mix = identity_matrix(channels);
    p.fusion_mix = identity_matrix(channels);
    p.s3_mix = identity_matrix(s3_channels);
    p.s5_mix = identity_matrix(s5_channels);
    p.n_scans = 4;
    return p;
}

DssmParams DssmParams::random(int channels, int s3_channels, int s5_channels,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unif = [&](double lo, double hi) {
        return lo + (hi - lo) * ((rng() >> 11) * (1.0 / 9007199254740992.0));
    };
    DssmParams p = identity(channels, s3_channels, s5_channels);
    auto fill = [&](std::vector<double>& v, double scale) {
        for (double& x : v) x = unif(-scale, scale);
    };
    fill(p.distortion_kernel, 0.5);
    fill(p.scale_kernel, 0.5);
    p.dyn_kernels.assign(4 * 9, 0.0);
    fill(p.dyn_kernels, 0.5);
    p.dyn_gates.assign(4, 0.0);
    fill(p.dyn_gates, 1.0);
    for (auto& s : p.ssm) {
        s.a = unif(-0.9, 0.9);
        s.b = unif(-1.0, 1.0);
        s.c = unif(-1.0, 1.0);
    }
    fill(p.residual_mix, 0.5);
    fill(p.fusion_mix, 0.5);
    fill(p.s3_mix, 0.5);
    fill(p.s5_mix, 0.5);
    return p;
}

std::pair<FeatureMap, FeatureMap> distortion_scale(const FeatureMap& s4,
                                                   const DssmParams& p) {
    p.validate();
    if (s4.c != p.channels)
        throw std::invalid_argument("distortion_scale: channel count mismatch");
    FeatureMap d = depthwise_conv3x3(s4, p.distortion_kernel);
    FeatureMap s = depthwise_conv3x3(s4, p.scale_kernel);
    for (double& v : s.data) v = sigmoid(v);
    return {std::move(d), std::move(s)};
}

FeatureMap mitigate_distortion(const FeatureMap& d, const FeatureMap& s,
                               const FeatureMap& s4, const DssmParams& p) {
    p.validate();
    require_shape(d, s, "mitigate_distortion");
    require_shape(d, s4, "mitigate_distortion");

    const int K = p.n_candidates();
    FeatureMap out(s4.b, s4.c, s4.w, s4.h);
    const double inv_area = 1.0 / (static_cast<double>(s4.w) * s4.h);

    for (int bi = 0; bi < s4.b; ++bi) {
        for (int ci = 0; ci < s4.c; ++ci) {
            // spatial mean of the modulation map d (Hadamard) s
            double pooled = 0.0;
            for (int x = 0; x < s4.w; ++x)
                for (int y = 0; y < s4.h; ++y)
                    pooled += d.at(bi, ci, x, y) * s.at(bi, ci, x, y);
            pooled *= inv_area;

            // softmax over the candidate bank; zero modulation -> uniform
            std::vector<double> wgt(K);
            double maxlogit = -1e300;
            for (int k = 0; k < K; ++k)
                maxlogit = std::max(maxlogit, p.dyn_gates[k] * pooled);
            double norm = 0.0;
            for (int k = 0; k < K; ++k) {
                wgt[k] = std::exp(p.dyn_gates[k] * pooled - maxlogit);
                norm += wgt[k];
            }
            double mixed[9] = {0};
            for (int k = 0; k < K; ++k) {
                const double a = wgt[k] / norm;
                for (int i = 0; i < 9; ++i)
                    mixed[i] += a * p.dyn_kernels[static_cast<std::size_t>(k) * 9 + i];
            }

            for (int x = 0; x < s4.w; ++x) {
                for (int y = 0; y < s4.h; ++y) {
                    double acc = 0.0;
                    for (int dx = -1; dx <= 1; ++dx)
                        for (int dy = -1; dy <= 1; ++dy) {
                            const int xx = x + dx, yy = y + dy;
                            if (xx < 0 || xx >= s4.w || yy < 0 || yy >= s4.h) continue;
                            acc += mixed[(dx + 1) * 3 + (dy + 1)] * s4.at(bi, ci, xx, yy);
                        }
                    out.at(bi, ci, x, y) = acc;
                }
            }
        }
    }
    return out;
}

FeatureMap ssm_scan(const FeatureMap& d, const DssmParams& p) {
    p.validate();
    if (d.c != p.channels)
        throw std::invalid_argument("ssm_scan: channel count mismatch");

    const int n = d.w * d.h;
    // scan orders over the flattened spatial grid: horizontal-major
    // forward/backward, then vertical-major forward/backward
    std::vector<std::vector<int>> orders;
    {
        std::vector<int> fwd(n);
        for (int x = 0; x < d.w; ++x)
            for (int y = 0; y < d.h; ++y) fwd[x * d.h + y] = x * d.h + y;
        std::vector<int> bwd(fwd.rbegin(), fwd.rend());
        std::vector<int> vfwd(n);
        int idx = 0;
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x) vfwd[idx++] = x * d.h + y;
        std::vector<int> vbwd(vfwd.rbegin(), vfwd.rend());
        orders = {fwd, bwd, vfwd, vbwd};
    }

    FeatureMap out(d.b, d.c, d.w, d.h);
    std::vector<double> seq(n), res(n);
    for (int bi = 0; bi < d.b; ++bi) {
        for (int ci = 0; ci < d.c; ++ci) {
            const SsmCoeffs& k = p.ssm[ci];
            const double* base =
                d.data.data() + (static_cast<std::size_t>(bi) * d.c + ci) * n;
            double* dst =
                out.data.data() + (static_cast<std::size_t>(bi) * d.c + ci) * n;
            for (int s = 0; s < p.n_scans; ++s) {
                const auto& ord = orders[s];
                double hstate = 0.0;
                for (int t = 0; t < n; ++t) {
                    hstate = k.a * hstate + k.b * base[ord[t]];
                    res[ord[t]] = k.c * hstate;
                }
                for (int t = 0; t < n; ++t) dst[t] += res[t];
            }
            const double inv = 1.0 / p.n_scans;
            for (int t = 0; t < n; ++t) dst[t] *= inv;
        }
    }
    return out;
}

FeatureMap fuse(const FeatureMap& s4, const FeatureMap& d_star, const DssmParams& p) {
    p.validate();
    require_shape(s4, d_star, "fuse");
    FeatureMap residual = channel_mix(s4, p.residual_mix, s4.c);
    for (std::size_t i = 0; i < residual.data.size(); ++i)
        residual.data[i] += d_star.data[i];
    return channel_mix(residual, p.fusion_mix, s4.c);
}

FeatureMap dssm_forward(const FeatureMap& s4, const DssmParams& p) {
    auto [d, s] = distortion_scale(s4, p);
    FeatureMap corrected = mitigate_distortion(d, s, s4, p);
    FeatureMap scanned = ssm_scan(corrected, p);
    return fuse(s4, scanned, p);
}

CsemOutput csem_forward(const FeatureMap& s3, const FeatureMap& s4,
                        const FeatureMap& s5, const DssmParams& p) {
    p.validate();
    if (s3.c != p.s3_channels || s5.c != p.s5_channels)
        throw std::invalid_argument("csem_forward: side channel count mismatch");

    CsemOutput out;
    out.s3 = p.dssm_target == 3 ? dssm_forward(s3, p) : channel_mix(s3, p.s3_mix, s3.c);
    out.s4 = p.dssm_target == 4 ? dssm_forward(s4, p) : channel_mix(s4, identity_matrix(s4.c), s4.c);
    out.s5 = p.dssm_target == 5 ? dssm_forward(s5, p) : channel_mix(s5, p.s5_mix, s5.c);
    return out;
}

std::string DssmParams::to_text() const {
    std::ostringstream out;
    out.precision(17);
    auto dump = [&](const char* name, const std::vector<double>& v) {
        out << name;
        for (double x : v) out << ' ' << x;
        out << '\n';
    };
    out << "channels " << channels << '\n'
        << "s3_channels " << s3_channels << '\n'
        << "s5_channels " << s5_channels << '\n'
        << "n_scans " << n_scans << '\n'
        << "dssm_target " << dssm_target << '\n';
    dump("distortion_kernel", distortion_kernel);
    dump("scale_kernel", scale_kernel);
    dump("dyn_kernels", dyn_kernels);
    dump("dyn_gates", dyn_gates);
    out << "ssm";
    for (const auto& s : ssm) out << ' ' << s.a << ' ' << s.b << ' ' << s.c;
    out << '\n';
    dump("residual_mix", residual_mix);
    dump("fusion_mix", fusion_mix);
    dump("s3_mix", s3_mix);
    dump("s5_mix", s5_mix);
    return out.str();
}

DssmParams DssmParams::from_text(const std::string& text) {
    DssmParams p;
    std::istringstream in(text);
    std::string key;
    auto read_vec = [&](std::istringstream& line) {
        std::vector<double> v;
        double x;
        while (line >> x) v.push_back(x);
        return v;
    };
    std::string linebuf;
    while (std::getline(in, linebuf)) {
        if (linebuf.empty() || linebuf[0] == '#') continue;
        std::istringstream line(linebuf);
        line >> key;
        if (key == "channels") line >> p.channels;
        else if (key == "s3_channels") line >> p.s3_channels;
        else if (key == "s5_channels") line >> p.s5_channels;
        else if (key == "n_scans") line >> p.n_scans;
        else if (key == "dssm_target") line >> p.dssm_target;
        else if (key == "distortion_kernel") p.distortion_kernel = read_vec(line);
        else if (key == "scale_kernel") p.scale_kernel = read_vec(line);
        else if (key == "dyn_kernels") p.dyn_kernels = read_vec(line);
        else if (key == "dyn_gates") p.dyn_gates = read_vec(line);
        else if (key == "ssm") {
            const auto flat = read_vec(line);
            if (flat.size() % 3 != 0)
                throw std::invalid_argument("DssmParams: malformed ssm line");
            for (std::size_t i = 0; i + 3 <= flat.size(); i += 3)
                p.ssm.push_back(SsmCoeffs{flat[i], flat[i + 1], flat[i + 2]});
        } else if (key == "residual_mix") p.residual_mix = read_vec(line);
        else if (key == "fusion_mix") p.fusion_mix = read_vec(line);
        else if (key == "s3_mix") p.s3_mix = read_vec(line);
        else if (key == "s5_mix") p.s5_mix = read_vec(line);
        else throw std::invalid_argument("DssmParams: unknown key " + key);
    }
    p.validate();
    return p;
}

}  // namespace omnitrack
