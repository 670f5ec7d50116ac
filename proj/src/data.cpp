#include "lobster/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lobster {

namespace {

std::uint32_t read_be32(std::FILE* f, const std::string& path) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4)
        throw std::runtime_error("read_idx: truncated header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Tensor read_idx(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("read_idx: cannot open " + path);
    struct Closer { std::FILE* f; ~Closer() { std::fclose(f); } } closer{f};

    const std::uint32_t magic = read_be32(f, path);
    std::size_t ndim;
    if (magic == 0x00000803u) ndim = 3;
    else if (magic == 0x00000801u) ndim = 1;
    else {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "0x%08x", magic);
        throw std::runtime_error("read_idx: unexpected magic " + std::string(buf) + " in " + path);
    }
    std::vector<std::size_t> shape(ndim);
    std::size_t total = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        shape[i] = read_be32(f, path);
        total *= shape[i];
    }
    std::vector<unsigned char> raw(total);
    const std::size_t got = std::fread(raw.data(), 1, total, f);
    if (got != total)
        throw std::runtime_error("read_idx: expected " + std::to_string(total) + " payload bytes, got " +
                                 std::to_string(got) + " in " + path);
    Tensor t = Tensor::zeros(shape);
    for (std::size_t i = 0; i < total; ++i) t.data[i] = static_cast<double>(raw[i]);
    return t;
}

namespace {

Dataset decode_pair(const std::string& images_path, const std::string& labels_path,
                    const std::string& tag) {
    Tensor images = read_idx(images_path);
    Tensor labels = read_idx(labels_path);
    if (images.rank() != 3 || labels.rank() != 1 || images.shape[0] != labels.shape[0])
        throw std::runtime_error("load_mnist_dir: inconsistent image/label files " + images_path);
    Dataset ds;
    const std::size_t n = images.shape[0];
    const std::size_t per = images.shape[1] * images.shape[2];
    ds.images = Tensor::zeros({n, per});
    for (std::size_t i = 0; i < images.size(); ++i) ds.images.data[i] = images.data[i] / 255.0;
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int l = static_cast<int>(labels.data[i]);
        if (l < 0 || l > 9)
            throw std::runtime_error("load_mnist_dir: label out of [0,9] in " + labels_path);
        ds.labels[i] = l;
    }
    ds.tag = tag;
    return ds;
}

}  // namespace

MnistData load_mnist_dir(const std::string& dir) {
    MnistData d;
    d.train = decode_pair(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte", "train");
    d.test = decode_pair(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte", "test");
    return d;
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& train, std::size_t val_size,
                                            std::uint64_t seed) {
    const std::size_t n = train.size();
    if (val_size >= n && val_size != 0)
        throw std::invalid_argument("split_train_val: val_size must be < N");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    const std::size_t per = train.images.size() / n;
    auto gather = [&](std::size_t begin, std::size_t count, const std::string& tag) {
        Dataset out;
        out.tag = tag;
        out.labels.resize(count);
        out.images = count ? Tensor::zeros({count, per}) : Tensor();
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t src = perm[begin + i];
            std::copy_n(train.images.data.begin() + src * per, per,
                        out.images.data.begin() + i * per);
            out.labels[i] = train.labels[src];
        }
        return out;
    };
    if (val_size == 0) {
        Dataset t = train;
        t.tag = "train";
        return {std::move(t), Dataset{Tensor(), {}, "val"}};
    }
    return {gather(0, n - val_size, "train"), gather(n - val_size, val_size, "val")};
}

Dataset synthetic_blobs(std::size_t n_per_class, std::size_t classes, std::size_t dim,
                        std::uint64_t seed, double separation) {
    if (classes < 2) throw std::invalid_argument("synthetic_blobs: classes must be >= 2");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    // Seeded random directions, rescaled until pairwise distances clear
    // the separation requirement.
    std::vector<std::vector<double>> means(classes, std::vector<double>(dim));
    for (auto& m : means)
        for (double& v : m) v = unit(rng);
    double min_dist = 0.0;
    double scale = 1.0;
    for (std::size_t a = 0; a < classes; ++a)
        for (std::size_t b = a + 1; b < classes; ++b) {
            double d2 = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double diff = means[a][k] - means[b][k];
                d2 += diff * diff;
            }
            const double d = std::sqrt(d2);
            if (a == 0 && b == 1) min_dist = d;
            min_dist = std::min(min_dist, d);
        }
    if (min_dist <= 0.0) throw std::runtime_error("synthetic_blobs: degenerate means");
    scale = separation / min_dist;
    for (auto& m : means)
        for (double& v : m) v *= scale;

    Dataset ds;
    ds.tag = "synthetic";
    const std::size_t n = n_per_class * classes;
    ds.images = Tensor::zeros({n, dim});
    ds.labels.resize(n);
    std::size_t idx = 0;
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t i = 0; i < n_per_class; ++i, ++idx) {
            for (std::size_t k = 0; k < dim; ++k)
                ds.images.data[idx * dim + k] = means[c][k] + noise(rng);
            ds.labels[idx] = static_cast<int>(c);
        }
    return ds;
}

DataSplit make_split(const Dataset& train, const Dataset& val, const Dataset& test) {
    DataSplit s;
    s.train_images = train.images;
    s.train_labels = train.labels;
    s.val_images = val.images;
    s.val_labels = val.labels;
    s.test_images = test.images;
    s.test_labels = test.labels;
    return s;
}

}  // namespace lobster
