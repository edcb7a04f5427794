/*
 * hostbridge.h: C ABI of the hostbridge mini host runtime.
 *
 * The runtime is strictly single-threaded. Every entry point except
 * mh_set_interrupt() must be called from the thread that called mh_init();
 * violations abort the process.
 *
 * Functions documented as "may jump" raise a host error: control transfers
 * with longjmp to the innermost active boundary (mh_call*, mh_try_eval or
 * mh_catch) without running any intervening cleanup. With no active boundary
 * a host error aborts the process.
 *
 * Coercion table (mh_as_real, mh_as_integer, mh_coerce):
 *
 *   from \ to   real                 integer                  logical
 *   real        identity             trunc toward zero;       0 -> FALSE, else TRUE;
 *                                    NaN/out of range -> NA   NaN -> NA
 *   integer     exact; NA -> NA      identity                 0 -> FALSE, else TRUE; NA -> NA
 *   logical     0/1; NA -> NA        0/1; NA -> NA            identity
 *   string      full strtod parse,   via real                 "TRUE"/"FALSE"/"T"/"F",
 *               otherwise NA                                  otherwise NA
 *   null        NA (scalar) / empty vector (mh_coerce)
 *   other kinds host error
 *
 * Scalar extraction uses element 0; a zero-length vector yields NA.
 */
#ifndef HOSTBRIDGE_H
#define HOSTBRIDGE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct MhCellRec *MhCell;
typedef struct MhEntryRec *MhEntry;
typedef struct MhLibraryRec *MhLibrary;

/* Generic function pointer; registered functions take `arity` MhCell
 * arguments and return an MhCell. */
typedef void (*MhFnPtr)(void);
typedef void (*MhCatchFn)(void *data);
typedef void (*MhConsoleSink)(const char *text, size_t len, void *data);
/* Entry point every loadable guest library exports under this name. */
typedef void (*MhRegisterFn)(void);

#define MH_REGISTER_SYMBOL "hostbridge_register"

/* Cell kinds. */
#define MH_NULL 0
#define MH_REAL 1
#define MH_INTEGER 2
#define MH_LOGICAL 3
#define MH_STRING 4
#define MH_SYMBOL 5
#define MH_LIST 6
#define MH_ENVIRONMENT 7
#define MH_CALLABLE 8

#define MH_NA_INTEGER INT32_MIN
#define MH_NA_LOGICAL INT32_MIN
/* Quiet NaN whose low word is 1954. */
#define MH_NA_REAL_BITS 0x7FF80000000007A2ULL
#define MH_NA_REAL_LOW_WORD 1954u

#define MH_MAX_ARITY 10
#define MH_MAX_LENGTH ((int64_t)INT32_MAX)

/* Lifecycle. HOSTBRIDGE_TORTURE=1 in the environment enables torture mode. */
void mh_init(void);
int32_t mh_is_initialized(void);
int32_t mh_on_host_thread(void);
void mh_set_torture(int32_t on);
int32_t mh_torture(void);

/* Collector and diagnostics. */
void mh_collect(void);
int64_t mh_live_cells(void);
int64_t mh_collections(void);
int32_t mh_is_poisoned(MhCell cell); /* never aborts */

/* Allocation (may jump: bad kind, negative or oversized length, OOM). */
MhCell mh_null(void);
MhCell mh_alloc_vector(int32_t kind, int64_t length);
MhCell mh_scalar_real(double x);
MhCell mh_scalar_integer(int32_t x);
MhCell mh_scalar_logical(int32_t x);

/* Protect stack. Underflow aborts. */
MhCell mh_protect(MhCell cell);
void mh_unprotect(int32_t n);
int32_t mh_protect_depth(void);

/* Queries (never jump). */
int32_t mh_kind(MhCell cell);
int64_t mh_length(MhCell cell);
int32_t mh_is_real(MhCell cell);
int32_t mh_is_integer(MhCell cell);
int32_t mh_is_logical(MhCell cell);
int32_t mh_nrow(MhCell cell); /* -1 without dimensions */
int32_t mh_ncol(MhCell cell); /* -1 without dimensions */

/* Coercions (may jump on non-coercible kinds). */
double mh_as_real(MhCell cell);
int32_t mh_as_integer(MhCell cell);
MhCell mh_coerce(MhCell cell, int32_t kind);

/* Direct element storage: double* for MH_REAL, int32_t* for MH_INTEGER and
 * MH_LOGICAL. May jump on kind mismatch. Never NULL. */
void *mh_raw_view(MhCell cell, int32_t kind);

/* Strings, lists, attributes (may jump on kind or index errors). */
const char *mh_string_elt(MhCell cell, int64_t i);
void mh_set_string_elt(MhCell cell, int64_t i, const char *text);
MhCell mh_list_elt(MhCell list, int64_t i);
void mh_set_list_elt(MhCell list, int64_t i, MhCell value);
void mh_set_names(MhCell cell, MhCell names);
MhCell mh_names(MhCell cell);
void mh_set_dim(MhCell cell, int32_t nrow, int32_t ncol);

/* Symbols, environments, evaluation. */
MhCell mh_install(const char *name);
const char *mh_symbol_name(MhCell symbol);
MhCell mh_global_env(void);
MhCell mh_new_env(MhCell parent);
void mh_define_var(MhCell symbol, MhCell value, MhCell env);
MhCell mh_find_var(MhCell symbol, MhCell env); /* C NULL when unbound */
/* Callable whose formals are looked up in the environment when the callable
 * itself is evaluated. */
MhCell mh_new_callable(MhFnPtr fn, int32_t arity, const char *const *formals);
/* Evaluates a callable or a call form (list: callable, then argument
 * symbols). Never jumps; *ok is 0 and the null cell returned on failure. */
MhCell mh_try_eval(MhCell form, MhCell env, int32_t *ok);

/* Random numbers: splitmix64-seeded xorshift64*, Box-Muller normals.
 * Draws outside a get/put window jump. */
void mh_rng_get(void);
void mh_rng_put(void);
void mh_rng_set_seed(uint64_t seed);
double mh_rng_unif(void);
double mh_rng_norm(double mean, double sd);
void mh_rng_unif_bytes(uint8_t *buf, int64_t n);

/* Console and interrupts. mh_print jumps when an interrupt is pending,
 * after clearing the flag and without printing. */
void mh_print(const char *text);
void mh_set_console(MhConsoleSink sink, void *data); /* NULL sink: stdout */
int32_t mh_interrupt_pending(void);
void mh_set_interrupt(int32_t flag); /* callable from any thread */

/* Errors and catching. */
void mh_error(const char *message) __attribute__((noreturn));
/* Runs fn(data) under a boundary; returns 1 on normal completion, 0 if a
 * host error was raised. The protect depth is restored on error. */
int32_t mh_catch(MhCatchFn fn, void *data);
const char *mh_last_error(void);

/* Registration and top-level calls. The mh_call* functions establish the
 * jump target, protect the arguments for the duration of the call, and
 * restore the protect depth afterwards. *err is set to "" on success and to
 * the error message otherwise; the null cell is returned on failure. */
void mh_register(const char *name, MhFnPtr fn, int32_t arity);
int32_t mh_deregister(const char *name);
MhEntry mh_lookup(const char *name); /* C NULL if unknown */
MhCell mh_call(const char *name, const MhCell *args, int32_t nargs, const char **err);
MhCell mh_call_entry(MhEntry entry, const MhCell *args, int32_t nargs, const char **err);
/* Resolves `symbol` with dlsym on every call; arity is taken from nargs. */
MhCell mh_call_symbol(const char *symbol, const MhCell *args, int32_t nargs, const char **err);
/* Protect depth left behind by the callee of the most recent mh_call*,
 * measured before the host restored it (0 for balanced callees). */
int32_t mh_last_call_leak(void);

/* Loadable guest libraries. */
MhLibrary mh_load_library(const char *path, const char **err);
/* 0 on success, -1 while a call into the library is in flight. */
int32_t mh_unload_library(MhLibrary lib);

/* Host-native demo functions. */
MhCell hb_native_euclid_norm(MhCell x);
MhCell hb_native_square_minus_4(MhCell x);

#ifdef __cplusplus
}
#endif

#endif
