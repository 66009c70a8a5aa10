#include "fiberlift/render.hpp"
#include "fiberlift/errors.hpp"

#include <cmath>
#include <cstring>

namespace fiberlift {

size_t Raster::lit_count() const {
    size_t n = 0;
    for (uint8_t p : pixels) n += p != 0;
    return n;
}

std::string Raster::to_pgm() const {
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    return out;
}

Raster Raster::dilate() const {
    Raster out = *this;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            if (lit(x, y)) continue;
            bool any = false;
            for (int dy = -1; dy <= 1 && !any; ++dy)
                for (int dx = -1; dx <= 1 && !any; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && ny >= 0 && nx < width && ny < height && lit(nx, ny)) any = true;
                }
            if (any) out.pixels[size_t(y) * width + x] = 255;
        }
    return out;
}

bool Raster::subset_of(const Raster& other) const {
    if (width != other.width || height != other.height) return false;
    for (size_t i = 0; i < pixels.size(); ++i)
        if (pixels[i] && !other.pixels[i]) return false;
    return true;
}

namespace {

uint32_t crc32_of(const uint8_t* data, size_t len, uint32_t crc = 0xFFFFFFFFu) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc;
}

void push_u32(std::string& s, uint32_t v) {
    s += char((v >> 24) & 0xFF);
    s += char((v >> 16) & 0xFF);
    s += char((v >> 8) & 0xFF);
    s += char(v & 0xFF);
}

void push_chunk(std::string& out, const char* type, const std::string& data) {
    push_u32(out, uint32_t(data.size()));
    std::string body = std::string(type, 4) + data;
    out += body;
    uint32_t crc = crc32_of(reinterpret_cast<const uint8_t*>(body.data()), body.size()) ^ 0xFFFFFFFFu;
    push_u32(out, crc);
}

} // namespace

std::string Raster::to_png() const {
    // raw scanlines with filter byte 0
    std::string raw;
    raw.reserve(size_t(height) * (width + 1));
    for (int y = 0; y < height; ++y) {
        raw += '\0';
        raw.append(reinterpret_cast<const char*>(pixels.data() + size_t(y) * width), width);
    }
    // zlib stream with stored (uncompressed) deflate blocks
    std::string z;
    z += char(0x78);
    z += char(0x01);
    size_t pos = 0;
    while (pos < raw.size()) {
        size_t take = std::min<size_t>(65535, raw.size() - pos);
        bool last = pos + take == raw.size();
        z += char(last ? 1 : 0);
        z += char(take & 0xFF);
        z += char((take >> 8) & 0xFF);
        z += char(~take & 0xFF);
        z += char((~take >> 8) & 0xFF);
        z.append(raw, pos, take);
        pos += take;
    }
    uint32_t a = 1, b = 0;
    for (unsigned char c : raw) {
        a = (a + c) % 65521;
        b = (b + a) % 65521;
    }
    push_u32(z, (b << 16) | a);

    std::string png("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    push_u32(ihdr, uint32_t(width));
    push_u32(ihdr, uint32_t(height));
    ihdr += char(8);  // bit depth
    ihdr += char(0);  // grayscale
    ihdr += char(0);
    ihdr += char(0);
    ihdr += char(0);
    push_chunk(png, "IHDR", ihdr);
    push_chunk(png, "IDAT", z);
    push_chunk(png, "IEND", "");
    return png;
}

Raster render_attractor(const FiberedSystem& sys, int n_iter, const RenderOptions& opt) {
    if (sys.dim_fiber < 1)
        throw CapabilityError("render_attractor: system has no fiber coordinate to draw");
    if (n_iter < 0) throw ParameterError("render_attractor: n_iter must be >= 0");

    Raster img;
    img.width = opt.image_size;
    img.height = opt.image_size;
    img.pixels.assign(size_t(img.width) * img.height, 0);

    const double half = 0.5 * opt.image_size;
    const double r0 = opt.inner_radius * half, r1 = opt.outer_radius * half;
    auto plot = [&](const double* x) {
        double angle = 6.283185307179586 * wrap01(x[0]);
        double t = (x[1] - sys.geom.fiber.lo[0]) / sys.geom.fiber.width(0);
        double r = r0 + (r1 - r0) * t;
        int px = int(half + r * std::cos(angle));
        int py = int(half + r * std::sin(angle));
        if (px >= 0 && py >= 0 && px < img.width && py < img.height)
            img.pixels[size_t(py) * img.width + px] = 255;
    };

    if (n_iter == 0) {
        // the zeroth image is the full phase space: fill the annulus exactly
        for (int py = 0; py < img.height; ++py)
            for (int px = 0; px < img.width; ++px) {
                double r = std::hypot(px - half, py - half);
                if (r >= r0 - 0.5 && r <= r1 + 0.5) img.pixels[size_t(py) * img.width + px] = 255;
            }
        return img;
    }

    // Base nodes sit at k/G with G odd: the doubling map permutes that set, so
    // the lit angular columns are identical at every iteration order and the
    // raster comparison is alias-free. Even G would collapse onto gcd(2^n, G)
    // columns instead.
    int G = opt.base_grid | 1;
    std::array<double, kMaxDim> x{}, t{};
    int fg = sys.dim_fiber >= 2 ? opt.fiber_grid : opt.fiber_grid * opt.fiber_grid;
    for (int by = 0; by < G; ++by) {
        for (int f1 = 0; f1 < fg; ++f1) {
            int f2max = sys.dim_fiber >= 2 ? opt.fiber_grid : 1;
            for (int f2 = 0; f2 < f2max; ++f2) {
                x[0] = double(by) / G;
                x[1] = sys.geom.fiber.lo[0] + (f1 + 0.5) / fg * sys.geom.fiber.width(0);
                if (sys.dim_fiber >= 2)
                    x[2] = sys.geom.fiber.lo[1] + (f2 + 0.5) / opt.fiber_grid * sys.geom.fiber.width(1);
                for (int k = 0; k < n_iter; ++k) {
                    sys.step(x.data(), t.data());
                    x = t;
                }
                plot(x.data());
            }
        }
    }
    return img;
}

} // namespace fiberlift
