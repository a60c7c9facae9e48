#ifndef GLYCOPIPE_H
#define GLYCOPIPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GlycoStatus {
  GLYCO_STATUS_OK = 0,
  GLYCO_STATUS_NULL_POINTER = 1,
  GLYCO_STATUS_INVALID_ARGUMENT = 2,
  GLYCO_STATUS_IO = 3,
  GLYCO_STATUS_FORMAT = 4,
  GLYCO_STATUS_CRYPTO = 5,
  GLYCO_STATUS_SHAPE = 6,
  GLYCO_STATUS_PANIC = 7,
} GlycoStatus;

// A Paillier ciphertext together with the number of encodings it sums.
typedef struct GlycoCiphertext GlycoCiphertext;

// A Paillier key pair with its fixed-point codec.
typedef struct GlycoKeypair GlycoKeypair;

// A trained fusion model.
typedef struct GlycoModel GlycoModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *glyco_last_error(void);

// Library version as a static NUL-terminated string.
const char *glyco_version(void);

// Loads a model checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum GlycoStatus glyco_model_load(const char *path, struct GlycoModel **out);

// # Safety
// `model` must come from `glyco_model_load` and not be used afterwards.
void glyco_model_free(struct GlycoModel *model);

// Number of static features the model expects, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uintptr_t glyco_model_static_dim(const struct GlycoModel *model);

// Predicted probability for one patient.
//
// # Safety
// `statics` must point to `n_statics` doubles, `series` to `n_series`
// doubles, and `out` must be valid for writing.
enum GlycoStatus glyco_model_predict(const struct GlycoModel *model,
                                     const double *statics,
                                     uintptr_t n_statics,
                                     const double *series,
                                     uintptr_t n_series,
                                     double *out);

// Generates a key pair whose modulus has exactly `bits` bits.
//
// # Safety
// `out` must be valid for writing.
enum GlycoStatus glyco_keypair_generate(uint64_t bits, uint64_t seed, struct GlycoKeypair **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum GlycoStatus glyco_keypair_load(const char *path, struct GlycoKeypair **out);

// # Safety
// `kp` must be a live handle and `path` a NUL-terminated string.
enum GlycoStatus glyco_keypair_save(const struct GlycoKeypair *kp, const char *path);

// Bit length of the public modulus, or 0 for a null handle.
//
// # Safety
// `kp` must be null or a live handle.
uint64_t glyco_keypair_bits(const struct GlycoKeypair *kp);

// # Safety
// `kp` must come from a `glyco_keypair_*` constructor and not be used afterwards.
void glyco_keypair_free(struct GlycoKeypair *kp);

// Encrypts a real number through the fixed-point codec. The nonce is
// drawn from a generator seeded with `seed`.
//
// # Safety
// `kp` must be a live handle and `out` valid for writing.
enum GlycoStatus glyco_encrypt(const struct GlycoKeypair *kp,
                               double value,
                               uint64_t seed,
                               struct GlycoCiphertext **out);

// Homomorphic sum of two ciphertexts under the same key.
//
// # Safety
// All handles must be live and `out` valid for writing.
enum GlycoStatus glyco_ciphertext_add(const struct GlycoKeypair *kp,
                                      const struct GlycoCiphertext *a,
                                      const struct GlycoCiphertext *b,
                                      struct GlycoCiphertext **out);

// Decrypts and decodes a ciphertext to a real number.
//
// # Safety
// Handles must be live and `out` valid for writing.
enum GlycoStatus glyco_decrypt(const struct GlycoKeypair *kp,
                               const struct GlycoCiphertext *c,
                               double *out);

// # Safety
// `c` must come from an encrypt/add call and not be used afterwards.
void glyco_ciphertext_free(struct GlycoCiphertext *c);

// Ring all-reduce over `workers` row-major vectors of length `len`;
// writes the elementwise sum to `out` (length `len`).
//
// # Safety
// `data` must point to `workers * len` doubles and `out` to `len` writable doubles.
enum GlycoStatus glyco_ring_allreduce(const double *data,
                                      uintptr_t workers,
                                      uintptr_t len,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLYCOPIPE_H */
