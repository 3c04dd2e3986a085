# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Direct convolution kernels. Hot path of candidate training.

Same padding geometry as the numpy backend: zero padding (k - 1) / 2, output
size floor((H - 1) / stride) + 1. Inner loops run over contiguous rows through
raw pointers so the C compiler can vectorize the stride-1 case; everything is
single-pass sequential, so results are bit-deterministic and the GIL is
released for the whole computation.
"""

ctypedef fused real:
    float
    double


cdef inline void _axpy(real* out, const real* x, real w, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        out[i] += w * x[i]


cdef inline void _axpy_strided(real* out, const real* x, real w,
                               Py_ssize_t n, Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        out[i] += w * x[i * stride]


cdef inline void _scatter_strided(real* out, const real* g, real w,
                                  Py_ssize_t n, Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(n):
        out[i * stride] += w * g[i]


cdef inline real _dot(const real* a, const real* b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef real acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0
    cdef Py_ssize_t n4 = n - (n & 3)
    for i in range(0, n4, 4):
        acc0 += a[i] * b[i]
        acc1 += a[i + 1] * b[i + 1]
        acc2 += a[i + 2] * b[i + 2]
        acc3 += a[i + 3] * b[i + 3]
    for i in range(n4, n):
        acc0 += a[i] * b[i]
    return ((acc0 + acc1) + (acc2 + acc3))


cdef inline real _dot_strided(const real* a, const real* b,
                              Py_ssize_t n, Py_ssize_t stride) noexcept nogil:
    cdef Py_ssize_t i
    cdef real acc = 0
    for i in range(n):
        acc += a[i] * b[i * stride]
    return acc


cdef inline Py_ssize_t _first_valid(Py_ssize_t off, Py_ssize_t stride) noexcept nogil:
    # smallest i >= 0 with i*stride + off >= 0
    if off >= 0:
        return 0
    return (-off + stride - 1) // stride


cdef inline Py_ssize_t _last_valid(Py_ssize_t off, Py_ssize_t stride,
                                   Py_ssize_t limit, Py_ssize_t n) noexcept nogil:
    # one past the largest i < n with i*stride + off < limit
    cdef Py_ssize_t hi = n
    if (n - 1) * stride + off >= limit:
        hi = (limit - 1 - off) // stride + 1
    if hi < 0:
        hi = 0
    return hi


def conv_forward_kernel(real[:, :, :, ::1] x, real[:, :, :, ::1] w,
                        int stride, real[:, :, :, ::1] out):
    cdef Py_ssize_t nb = x.shape[0], ci = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t oh = out.shape[2], ow = out.shape[3]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef Py_ssize_t ib, io, ic, kh, kw, y, iy, off, x0, x1
    cdef real wv
    cdef const real* xrow
    cdef real* orow

    with nogil:
        for ib in range(nb):
            for io in range(co):
                for ic in range(ci):
                    for kh in range(k):
                        for kw in range(k):
                            wv = w[io, ic, kh, kw]
                            if wv == 0:
                                continue
                            off = kw - pad
                            x0 = _first_valid(off, stride)
                            x1 = _last_valid(off, stride, wd, ow)
                            if x1 <= x0:
                                continue
                            for y in range(oh):
                                iy = y * stride - pad + kh
                                if iy < 0 or iy >= h:
                                    continue
                                xrow = &x[ib, ic, iy, 0]
                                orow = &out[ib, io, y, 0]
                                if stride == 1:
                                    _axpy(orow + x0, xrow + x0 + off, wv, x1 - x0)
                                else:
                                    _axpy_strided(orow + x0, xrow + x0 * stride + off,
                                                  wv, x1 - x0, stride)


def conv_backward_input_kernel(real[:, :, :, ::1] g, real[:, :, :, ::1] w,
                               int stride, real[:, :, :, ::1] gx):
    cdef Py_ssize_t nb = g.shape[0], co = g.shape[1], oh = g.shape[2], ow = g.shape[3]
    cdef Py_ssize_t ci = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t h = gx.shape[2], wd = gx.shape[3]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef Py_ssize_t ib, io, ic, kh, kw, y, iy, off, x0, x1
    cdef real wv
    cdef const real* grow
    cdef real* gxrow

    with nogil:
        for ib in range(nb):
            for io in range(co):
                for ic in range(ci):
                    for kh in range(k):
                        for kw in range(k):
                            wv = w[io, ic, kh, kw]
                            if wv == 0:
                                continue
                            off = kw - pad
                            x0 = _first_valid(off, stride)
                            x1 = _last_valid(off, stride, wd, ow)
                            if x1 <= x0:
                                continue
                            for y in range(oh):
                                iy = y * stride - pad + kh
                                if iy < 0 or iy >= h:
                                    continue
                                grow = &g[ib, io, y, 0]
                                gxrow = &gx[ib, ic, iy, 0]
                                if stride == 1:
                                    _axpy(gxrow + x0 + off, grow + x0, wv, x1 - x0)
                                else:
                                    _scatter_strided(gxrow + x0 * stride + off,
                                                     grow + x0, wv, x1 - x0, stride)


def conv_backward_weight_kernel(real[:, :, :, ::1] x, real[:, :, :, ::1] g,
                                int stride, real[:, :, :, ::1] gw):
    cdef Py_ssize_t nb = x.shape[0], ci = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co = g.shape[1], oh = g.shape[2], ow = g.shape[3]
    cdef Py_ssize_t k = gw.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef Py_ssize_t ib, io, ic, kh, kw, y, iy, off, x0, x1
    cdef real acc
    cdef const real* grow
    cdef const real* xrow

    with nogil:
        for io in range(co):
            for ic in range(ci):
                for kh in range(k):
                    for kw in range(k):
                        off = kw - pad
                        x0 = _first_valid(off, stride)
                        x1 = _last_valid(off, stride, wd, ow)
                        acc = 0
                        if x1 > x0:
                            for ib in range(nb):
                                for y in range(oh):
                                    iy = y * stride - pad + kh
                                    if iy < 0 or iy >= h:
                                        continue
                                    grow = &g[ib, io, y, 0]
                                    xrow = &x[ib, ic, iy, 0]
                                    if stride == 1:
                                        acc += _dot(grow + x0, xrow + x0 + off, x1 - x0)
                                    else:
                                        acc += _dot_strided(grow + x0,
                                                            xrow + x0 * stride + off,
                                                            x1 - x0, stride)
                        gw[io, ic, kh, kw] += acc
