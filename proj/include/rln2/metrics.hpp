#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rln2/image.hpp"

namespace rln2::metrics {

// PSNR saturates at this sentinel for exact matches so set averages stay finite.
constexpr double kPsnrCapDb = 99.0;

double psnr(const Image& pred, const Image& ref, double peak = 1.0);

// SSIM with the original constants: 11x11 Gaussian window, sigma 1.5,
// K1=0.01, K2=0.03, valid windows only, mean over RGB channels.
double ssim(const Image& pred, const Image& ref);

struct SampleMetrics {
    std::string sample_id;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    double psnr_db = 0.0;  // arithmetic mean over samples
    double ssim = 0.0;
    std::size_t sample_count = 0;
    std::vector<SampleMetrics> per_sample;

    void add(const std::string& sample_id, double psnr_db_value, double ssim_value);
    // Header records the SSIM channel convention alongside the aggregates.
    std::string to_kvtext() const;
    std::string to_csv() const;
};

// Perceptual-metric plug-in interface: name -> callable. No implementation is
// bundled; external metrics (e.g. LPIPS) can be registered by embedding code.
using MetricFn = std::function<double(const Image& pred, const Image& ref)>;
void register_metric_plugin(const std::string& name, MetricFn fn);
std::optional<MetricFn> find_metric_plugin(const std::string& name);

}  // namespace rln2::metrics
