#include "posekit/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace posekit {

void sample_bilinear(const Image& img, double x, double y, float out[3]) {
    const double u = x - 0.5, v = y - 0.5;
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const double fx = u - x0, fy = v - y0;
    out[0] = out[1] = out[2] = 0.0f;
    for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
            const int xi = x0 + dx, yi = y0 + dy;
            if (xi < 0 || xi >= img.width || yi < 0 || yi >= img.height) continue;
            const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
            const float* p = img.at(xi, yi);
            out[0] += static_cast<float>(w * p[0]);
            out[1] += static_cast<float>(w * p[1]);
            out[2] += static_cast<float>(w * p[2]);
        }
}

Image crop_image(const Image& img, const Roi& roi, int crop_size) {
    const SimilarityTransform t = roi_to_transform(roi, crop_size);
    Image out(crop_size, crop_size);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = 0; y < crop_size; ++y)
        for (int x = 0; x < crop_size; ++x) {
            const Point2 p = t.apply({x + 0.5, y + 0.5});
            sample_bilinear(img, p.x, p.y, out.at(x, y));
        }
    return out;
}

Tensor<float> image_to_tensor(const Image& img) {
    Tensor<float> t({3, img.height, img.width});
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const float* p = img.at(x, y);
            for (int c = 0; c < 3; ++c)
                t[(static_cast<int64_t>(c) * img.height + y) * img.width + x] = p[c];
        }
    return t;
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_ppm: cannot open " + path);
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float* p = img.at(x, y);
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(p[c], 0.0f, 1.0f);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw std::runtime_error("write_ppm: write failed for " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw std::runtime_error("read_ppm: not a P6 file: " + path);
    int w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    if (!is || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("read_ppm: unsupported header in " + path);
    is.get();  // single whitespace after maxval
    Image img(w, h);
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h * 3);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw std::runtime_error("read_ppm: truncated pixel data in " + path);
    for (size_t i = 0; i < buf.size(); ++i) img.px[i] = static_cast<float>(buf[i]) / 255.0f;
    return img;
}

}  // namespace posekit
