#include "rln2/metrics.hpp"

#include <cmath>
#include <sstream>

namespace rln2::metrics {

double psnr(const Image& pred, const Image& ref, double peak) {
    check_same_shape(pred, ref, "psnr");
    if (peak <= 0.0) throw ValueError("psnr: peak must be positive");
    double se = 0.0;
    const auto& a = pred.vec();
    const auto& b = ref.vec();
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        se += d * d;
    }
    double mse = se / static_cast<double>(a.size());
    if (mse <= 0.0) return kPsnrCapDb;
    double v = 10.0 * std::log10(peak * peak / mse);
    return v > kPsnrCapDb ? kPsnrCapDb : v;
}

namespace {

std::vector<double> gaussian_window(int radius, double sigma) {
    std::vector<double> w(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        w[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += w[i + radius];
    }
    for (auto& x : w) x /= sum;
    return w;
}

// Valid-mode separable Gaussian filtering of one channel plane.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& win) {
    const int r = static_cast<int>(win.size() / 2);
    const int oh = h - 2 * r, ow = w - 2 * r;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < static_cast<int>(win.size()); ++k)
                acc += win[k] * src[static_cast<std::size_t>(y) * w + x + k];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < static_cast<int>(win.size()); ++k)
                acc += win[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace

double ssim(const Image& pred, const Image& ref) {
    check_same_shape(pred, ref, "ssim");
    constexpr int kRadius = 5;  // 11x11 window
    constexpr double kSigma = 1.5;
    constexpr double kK1 = 0.01, kK2 = 0.03, kPeak = 1.0;
    const double c1 = (kK1 * kPeak) * (kK1 * kPeak);
    const double c2 = (kK2 * kPeak) * (kK2 * kPeak);

    const int h = pred.height(), w = pred.width(), c = pred.channels();
    if (h < 2 * kRadius + 1 || w < 2 * kRadius + 1)
        throw ShapeError("ssim: image smaller than the 11x11 window");

    const auto win = gaussian_window(kRadius, kSigma);
    const std::size_t n = static_cast<std::size_t>(h) * w;

    double total = 0.0;
    std::size_t count = 0;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (int ch = 0; ch < c; ++ch) {
        for (int yy_ = 0; yy_ < h; ++yy_)
            for (int xx_ = 0; xx_ < w; ++xx_) {
                std::size_t i = static_cast<std::size_t>(yy_) * w + xx_;
                double a = pred.at(yy_, xx_, ch);
                double b = ref.at(yy_, xx_, ch);
                x[i] = a;
                y[i] = b;
                xx[i] = a * a;
                yy[i] = b * b;
                xy[i] = a * b;
            }
        auto mu_x = filter_valid(x, h, w, win);
        auto mu_y = filter_valid(y, h, w, win);
        auto m_xx = filter_valid(xx, h, w, win);
        auto m_yy = filter_valid(yy, h, w, win);
        auto m_xy = filter_valid(xy, h, w, win);
        for (std::size_t i = 0; i < mu_x.size(); ++i) {
            double mx = mu_x[i], my = mu_y[i];
            double vx = m_xx[i] - mx * mx;
            double vy = m_yy[i] - my * my;
            double cov = m_xy[i] - mx * my;
            double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            double den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

void MetricReport::add(const std::string& sample_id, double psnr_db_value, double ssim_value) {
    per_sample.push_back({sample_id, psnr_db_value, ssim_value});
    sample_count = per_sample.size();
    double ps = 0.0, ss = 0.0;
    for (const auto& s : per_sample) {
        ps += s.psnr_db;
        ss += s.ssim;
    }
    psnr_db = ps / static_cast<double>(sample_count);
    ssim = ss / static_cast<double>(sample_count);
}

std::string MetricReport::to_kvtext() const {
    std::ostringstream os;
    os.precision(17);
    os << "psnr_db=" << psnr_db << "\n";
    os << "sample_count=" << sample_count << "\n";
    os << "ssim=" << ssim << "\n";
    os << "ssim_channels=rgb_mean\n";
    return os.str();
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "sample_id,psnr,ssim\n";
    for (const auto& s : per_sample) os << s.sample_id << "," << s.psnr_db << "," << s.ssim << "\n";
    return os.str();
}

namespace {
std::map<std::string, MetricFn>& plugin_registry() {
    static std::map<std::string, MetricFn> reg;
    return reg;
}
}  // namespace

void register_metric_plugin(const std::string& name, MetricFn fn) {
    plugin_registry()[name] = std::move(fn);
}

std::optional<MetricFn> find_metric_plugin(const std::string& name) {
    auto& reg = plugin_registry();
    auto it = reg.find(name);
    if (it == reg.end()) return std::nullopt;
    return it->second;
}

}  // namespace rln2::metrics
