/*
 * Mini host runtime: cells, protect stack, mark-sweep collector with a
 * poisoning quarantine, setjmp/longjmp errors, environments, a small PRNG,
 * console output, and a registry of foreign functions.
 */
#define _GNU_SOURCE
#include "hostbridge.h"

#include <dlfcn.h>
#include <math.h>
#include <pthread.h>
#include <setjmp.h>
#include <stdarg.h>
#include <stdatomic.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#define CELL_MAGIC 0x48424331u
#define ERROR_BUF_LEN 1024
#define QUARANTINE_LEN (1u << 18)
#define GC_MIN_INTERVAL 4096

struct MhCellRec {
    uint32_t magic;
    uint8_t kind;
    uint8_t mark;
    uint8_t poison;
    uint8_t has_dim;
    int32_t nrow;
    int32_t ncol;
    int64_t length;
    MhCell names;
    union {
        double *real;
        int32_t *ints;
        char **strs;
        MhCell *elts;
        char *symbol;
        struct {
            MhCell parent;
            MhCell *syms;
            MhCell *vals;
            int64_t count;
            int64_t cap;
        } env;
        struct {
            MhFnPtr fn;
            int32_t arity;
            MhCell *formals;
        } callable;
    } u;
};

struct MhEntryRec {
    char *name;
    MhFnPtr fn;
    int32_t arity;
    int32_t active;
    int32_t in_flight;
    MhLibrary lib;
};

struct MhLibraryRec {
    void *dl;
};

/* One active jump target. */
typedef struct Context {
    jmp_buf buf;
    int32_t depth;
    struct Context *prev;
} Context;

/* ---- global state ---- */

static int initialized;
static pthread_t owner;
static int torture;

static MhCell *heap;
static int64_t heap_len, heap_cap;
static int64_t allocs_since_gc;
static int64_t gc_trigger = GC_MIN_INTERVAL;
static int64_t collections;

static MhCell *quarantine;
static uint64_t quarantine_head;

static MhCell *protect_stack;
static int32_t protect_depth, protect_cap;

static MhCell *symbols;
static int64_t symbols_len, symbols_cap;

static MhCell null_cell;
static MhCell global_env;

static Context *top_context;
static char error_buf[ERROR_BUF_LEN];
static int32_t last_call_leak;

static uint64_t rng_state;
static int rng_active;

static atomic_int interrupt_flag;
static MhConsoleSink console_sink;
static void *console_data;

static MhEntry *registry;
static int64_t registry_len, registry_cap;
static MhLibrary loading_library;

/* ---- fatal diagnostics ---- */

__attribute__((noreturn, format(printf, 1, 2))) static void die(const char *fmt, ...) {
    va_list ap;
    fflush(stdout);
    fputs("hostbridge: fatal: ", stderr);
    va_start(ap, fmt);
    vfprintf(stderr, fmt, ap);
    va_end(ap);
    fputc('\n', stderr);
    fflush(stderr);
    abort();
}

static void check_thread(const char *where) {
    if (!initialized)
        die("%s: runtime not initialized", where);
    if (!pthread_equal(owner, pthread_self()))
        die("%s: called from a thread other than the host thread", where);
}

#define ENTER() check_thread(__func__)

static MhCell check_cell(MhCell c, const char *where) {
    if (c == NULL)
        die("%s: null cell reference", where);
    if (c->magic != CELL_MAGIC)
        die("%s: invalid cell reference %p", where, (void *)c);
    if (c->poison)
        die("%s: access to collected cell %p (missing protect?)", where, (void *)c);
    return c;
}

#define CHECK(c) check_cell((c), __func__)

static void *xmalloc(size_t n) {
    void *p = malloc(n ? n : 1);
    if (!p)
        die("out of memory");
    return p;
}

static void *xrealloc(void *p, size_t n) {
    void *q = realloc(p, n ? n : 1);
    if (!q)
        die("out of memory");
    return q;
}

static char *xstrdup(const char *s) {
    size_t n = strlen(s) + 1;
    char *d = xmalloc(n);
    memcpy(d, s, n);
    return d;
}

static const char *kind_name(int32_t kind) {
    switch (kind) {
    case MH_NULL: return "null";
    case MH_REAL: return "real vector";
    case MH_INTEGER: return "integer vector";
    case MH_LOGICAL: return "logical vector";
    case MH_STRING: return "string vector";
    case MH_SYMBOL: return "symbol";
    case MH_LIST: return "list";
    case MH_ENVIRONMENT: return "environment";
    case MH_CALLABLE: return "callable";
    default: return "unknown kind";
    }
}

/* ---- errors ---- */

__attribute__((noreturn, format(printf, 1, 2))) static void host_raise(const char *fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    vsnprintf(error_buf, sizeof error_buf, fmt, ap);
    va_end(ap);
    if (top_context == NULL)
        die("unhandled host error: %s", error_buf);
    longjmp(top_context->buf, 1);
}

void mh_error(const char *message) {
    ENTER();
    host_raise("%s", message ? message : "(null message)");
}

const char *mh_last_error(void) {
    ENTER();
    return error_buf;
}

int32_t mh_catch(MhCatchFn fn, void *data) {
    ENTER();
    Context ctx;
    ctx.depth = protect_depth;
    ctx.prev = top_context;
    top_context = &ctx;
    if (setjmp(ctx.buf)) {
        top_context = ctx.prev;
        protect_depth = ctx.depth;
        return 0;
    }
    fn(data);
    top_context = ctx.prev;
    return 1;
}

/* ---- lifecycle ---- */

static MhCell raw_alloc_cell(int32_t kind);

void mh_init(void) {
    if (initialized) {
        check_thread("mh_init");
        return;
    }
    owner = pthread_self();
    initialized = 1;
    const char *t = getenv("HOSTBRIDGE_TORTURE");
    torture = t != NULL && strcmp(t, "1") == 0;
    quarantine = calloc(QUARANTINE_LEN, sizeof(MhCell));
    if (!quarantine)
        die("out of memory");
    null_cell = raw_alloc_cell(MH_NULL);
    global_env = raw_alloc_cell(MH_ENVIRONMENT);
    global_env->u.env.parent = NULL;
    mh_rng_set_seed(0);
    error_buf[0] = '\0';
}

int32_t mh_is_initialized(void) { return initialized; }

int32_t mh_on_host_thread(void) { return initialized && pthread_equal(owner, pthread_self()); }

void mh_set_torture(int32_t on) {
    ENTER();
    torture = on != 0;
}

int32_t mh_torture(void) {
    ENTER();
    return torture;
}

/* ---- collector ---- */

static void mark_push(MhCell **stack, int64_t *len, int64_t *cap, MhCell c) {
    if (c == NULL || c->mark)
        return;
    c->mark = 1;
    if (*len == *cap) {
        *cap = *cap ? *cap * 2 : 256;
        *stack = xrealloc(*stack, (size_t)*cap * sizeof(MhCell));
    }
    (*stack)[(*len)++] = c;
}

static void free_payload(MhCell c) {
    switch (c->kind) {
    case MH_REAL: free(c->u.real); break;
    case MH_INTEGER:
    case MH_LOGICAL: free(c->u.ints); break;
    case MH_STRING:
        for (int64_t i = 0; i < c->length; i++)
            free(c->u.strs[i]);
        free(c->u.strs);
        break;
    case MH_LIST: free(c->u.elts); break;
    case MH_SYMBOL: free(c->u.symbol); break;
    case MH_ENVIRONMENT:
        free(c->u.env.syms);
        free(c->u.env.vals);
        break;
    case MH_CALLABLE: free(c->u.callable.formals); break;
    default: break;
    }
    memset(&c->u, 0, sizeof c->u);
}

static void quarantine_cell(MhCell c) {
    MhCell *slot = &quarantine[quarantine_head % QUARANTINE_LEN];
    if (*slot != NULL) {
        (*slot)->magic = 0;
        free(*slot);
    }
    *slot = c;
    quarantine_head++;
}

void mh_collect(void) {
    ENTER();
    MhCell *stack = NULL;
    int64_t len = 0, cap = 0;

    mark_push(&stack, &len, &cap, null_cell);
    mark_push(&stack, &len, &cap, global_env);
    for (int32_t i = 0; i < protect_depth; i++)
        mark_push(&stack, &len, &cap, protect_stack[i]);
    for (int64_t i = 0; i < symbols_len; i++)
        mark_push(&stack, &len, &cap, symbols[i]);

    while (len > 0) {
        MhCell c = stack[--len];
        mark_push(&stack, &len, &cap, c->names);
        switch (c->kind) {
        case MH_LIST:
            for (int64_t i = 0; i < c->length; i++)
                mark_push(&stack, &len, &cap, c->u.elts[i]);
            break;
        case MH_ENVIRONMENT:
            mark_push(&stack, &len, &cap, c->u.env.parent);
            for (int64_t i = 0; i < c->u.env.count; i++) {
                mark_push(&stack, &len, &cap, c->u.env.syms[i]);
                mark_push(&stack, &len, &cap, c->u.env.vals[i]);
            }
            break;
        case MH_CALLABLE:
            for (int32_t i = 0; c->u.callable.formals && i < c->u.callable.arity; i++)
                mark_push(&stack, &len, &cap, c->u.callable.formals[i]);
            break;
        default: break;
        }
    }
    free(stack);

    int64_t kept = 0;
    for (int64_t i = 0; i < heap_len; i++) {
        MhCell c = heap[i];
        if (c->mark) {
            c->mark = 0;
            heap[kept++] = c;
        } else {
            free_payload(c);
            c->poison = 1;
            c->names = NULL;
            quarantine_cell(c);
        }
    }
    heap_len = kept;
    collections++;
    allocs_since_gc = 0;
    gc_trigger = heap_len > GC_MIN_INTERVAL ? heap_len : GC_MIN_INTERVAL;
}

int64_t mh_live_cells(void) {
    ENTER();
    return heap_len;
}

int64_t mh_collections(void) {
    ENTER();
    return collections;
}

int32_t mh_is_poisoned(MhCell cell) {
    ENTER();
    return cell != NULL && cell->magic == CELL_MAGIC && cell->poison;
}

static void maybe_collect(void) {
    if (torture || allocs_since_gc >= gc_trigger)
        mh_collect();
}

static MhCell raw_alloc_cell(int32_t kind) {
    MhCell c = calloc(1, sizeof *c);
    if (!c)
        host_raise("cannot allocate cell");
    c->magic = CELL_MAGIC;
    c->kind = (uint8_t)kind;
    c->nrow = c->ncol = -1;
    if (heap_len == heap_cap) {
        heap_cap = heap_cap ? heap_cap * 2 : 1024;
        heap = xrealloc(heap, (size_t)heap_cap * sizeof(MhCell));
    }
    heap[heap_len++] = c;
    allocs_since_gc++;
    return c;
}

/* Allocates a cell after a possible collection. Cells the caller still needs
 * must be protected across this call. */
static MhCell alloc_cell(int32_t kind) {
    maybe_collect();
    return raw_alloc_cell(kind);
}

/* ---- protect stack ---- */

MhCell mh_protect(MhCell cell) {
    ENTER();
    CHECK(cell);
    if (protect_depth == protect_cap) {
        protect_cap = protect_cap ? protect_cap * 2 : 256;
        protect_stack = xrealloc(protect_stack, (size_t)protect_cap * sizeof(MhCell));
    }
    protect_stack[protect_depth++] = cell;
    return cell;
}

void mh_unprotect(int32_t n) {
    ENTER();
    if (n < 0 || n > protect_depth)
        die("mh_unprotect: protect stack underflow (unprotect %d with depth %d)", n, protect_depth);
    protect_depth -= n;
}

int32_t mh_protect_depth(void) {
    ENTER();
    return protect_depth;
}

/* ---- allocation ---- */

MhCell mh_null(void) {
    ENTER();
    return null_cell;
}

static int is_vector_kind(int32_t kind) {
    return kind == MH_REAL || kind == MH_INTEGER || kind == MH_LOGICAL || kind == MH_STRING ||
           kind == MH_LIST;
}

MhCell mh_alloc_vector(int32_t kind, int64_t length) {
    ENTER();
    if (!is_vector_kind(kind))
        host_raise("cannot allocate a vector of kind %s", kind_name(kind));
    if (length < 0 || length > MH_MAX_LENGTH)
        host_raise("invalid vector length %lld", (long long)length);
    size_t n = length > 0 ? (size_t)length : 1;
    void *data;
    switch (kind) {
    case MH_REAL: data = calloc(n, sizeof(double)); break;
    case MH_INTEGER:
    case MH_LOGICAL: data = calloc(n, sizeof(int32_t)); break;
    case MH_STRING: data = calloc(n, sizeof(char *)); break;
    default: data = calloc(n, sizeof(MhCell)); break;
    }
    if (!data)
        host_raise("cannot allocate vector of length %lld", (long long)length);
    MhCell c = alloc_cell(kind);
    c->length = length;
    switch (kind) {
    case MH_REAL: c->u.real = data; break;
    case MH_INTEGER:
    case MH_LOGICAL: c->u.ints = data; break;
    case MH_STRING: c->u.strs = data; break;
    default:
        c->u.elts = data;
        for (int64_t i = 0; i < length; i++)
            c->u.elts[i] = null_cell;
        break;
    }
    return c;
}

MhCell mh_scalar_real(double x) {
    MhCell c = mh_alloc_vector(MH_REAL, 1);
    c->u.real[0] = x;
    return c;
}

MhCell mh_scalar_integer(int32_t x) {
    MhCell c = mh_alloc_vector(MH_INTEGER, 1);
    c->u.ints[0] = x;
    return c;
}

MhCell mh_scalar_logical(int32_t x) {
    MhCell c = mh_alloc_vector(MH_LOGICAL, 1);
    c->u.ints[0] = x == MH_NA_LOGICAL ? MH_NA_LOGICAL : (x != 0);
    return c;
}

/* ---- queries ---- */

int32_t mh_kind(MhCell cell) {
    ENTER();
    return CHECK(cell)->kind;
}

int64_t mh_length(MhCell cell) {
    ENTER();
    CHECK(cell);
    switch (cell->kind) {
    case MH_REAL:
    case MH_INTEGER:
    case MH_LOGICAL:
    case MH_STRING:
    case MH_LIST: return cell->length;
    case MH_ENVIRONMENT: return cell->u.env.count;
    case MH_NULL: return 0;
    default: return 1;
    }
}

int32_t mh_is_real(MhCell cell) {
    ENTER();
    return CHECK(cell)->kind == MH_REAL;
}

int32_t mh_is_integer(MhCell cell) {
    ENTER();
    return CHECK(cell)->kind == MH_INTEGER;
}

int32_t mh_is_logical(MhCell cell) {
    ENTER();
    return CHECK(cell)->kind == MH_LOGICAL;
}

int32_t mh_nrow(MhCell cell) {
    ENTER();
    return CHECK(cell)->has_dim ? cell->nrow : -1;
}

int32_t mh_ncol(MhCell cell) {
    ENTER();
    return CHECK(cell)->has_dim ? cell->ncol : -1;
}

/* ---- coercion ---- */

static double na_real(void) {
    uint64_t bits = MH_NA_REAL_BITS;
    double d;
    memcpy(&d, &bits, sizeof d);
    return d;
}

static double real_from_int(int32_t x) { return x == MH_NA_INTEGER ? na_real() : (double)x; }

static int32_t int_from_real(double x) {
    if (isnan(x) || x >= 2147483648.0 || x <= -2147483649.0)
        return MH_NA_INTEGER;
    double t = trunc(x);
    if (t == (double)INT32_MIN)
        return MH_NA_INTEGER;
    return (int32_t)t;
}

static int32_t logical_from_real(double x) { return isnan(x) ? MH_NA_LOGICAL : (x != 0.0); }

static int32_t logical_from_int(int32_t x) { return x == MH_NA_INTEGER ? MH_NA_LOGICAL : (x != 0); }

static double real_from_string(const char *s) {
    if (s == NULL || *s == '\0' || strcmp(s, "NA") == 0)
        return na_real();
    char *end;
    double d = strtod(s, &end);
    while (*end == ' ' || *end == '\t')
        end++;
    return *end == '\0' ? d : na_real();
}

static int32_t logical_from_string(const char *s) {
    if (s == NULL)
        return MH_NA_LOGICAL;
    if (!strcmp(s, "TRUE") || !strcmp(s, "T") || !strcmp(s, "true"))
        return 1;
    if (!strcmp(s, "FALSE") || !strcmp(s, "F") || !strcmp(s, "false"))
        return 0;
    return MH_NA_LOGICAL;
}

static char *string_from_real(double x) {
    char buf[64];
    uint64_t bits;
    memcpy(&bits, &x, sizeof bits);
    if (isnan(x) && (uint32_t)bits == MH_NA_REAL_LOW_WORD)
        return xstrdup("NA");
    snprintf(buf, sizeof buf, "%.15g", x);
    return xstrdup(buf);
}

static char *string_from_int(int32_t x) {
    char buf[32];
    if (x == MH_NA_INTEGER)
        return xstrdup("NA");
    snprintf(buf, sizeof buf, "%d", x);
    return xstrdup(buf);
}

static char *string_from_logical(int32_t x) {
    return xstrdup(x == MH_NA_LOGICAL ? "NA" : (x ? "TRUE" : "FALSE"));
}

static int is_atomic(int32_t kind) {
    return kind == MH_REAL || kind == MH_INTEGER || kind == MH_LOGICAL || kind == MH_STRING;
}

double mh_as_real(MhCell cell) {
    ENTER();
    CHECK(cell);
    if (cell->kind == MH_NULL)
        return na_real();
    if (!is_atomic(cell->kind))
        host_raise("cannot coerce %s to real", kind_name(cell->kind));
    if (cell->length == 0)
        return na_real();
    switch (cell->kind) {
    case MH_REAL: return cell->u.real[0];
    case MH_INTEGER:
    case MH_LOGICAL: return real_from_int(cell->u.ints[0]);
    default: return real_from_string(cell->u.strs[0]);
    }
}

int32_t mh_as_integer(MhCell cell) {
    ENTER();
    CHECK(cell);
    if (cell->kind == MH_NULL)
        return MH_NA_INTEGER;
    if (!is_atomic(cell->kind))
        host_raise("cannot coerce %s to integer", kind_name(cell->kind));
    if (cell->length == 0)
        return MH_NA_INTEGER;
    switch (cell->kind) {
    case MH_REAL: return int_from_real(cell->u.real[0]);
    case MH_INTEGER:
    case MH_LOGICAL: return cell->u.ints[0];
    default: return int_from_real(real_from_string(cell->u.strs[0]));
    }
}

MhCell mh_coerce(MhCell cell, int32_t kind) {
    ENTER();
    CHECK(cell);
    if (!is_atomic(kind))
        host_raise("cannot coerce to %s", kind_name(kind));
    if (cell->kind == kind)
        return cell;
    if (cell->kind == MH_NULL)
        return mh_alloc_vector(kind, 0);
    if (!is_atomic(cell->kind))
        host_raise("cannot coerce %s to %s", kind_name(cell->kind), kind_name(kind));

    mh_protect(cell);
    MhCell out = mh_alloc_vector(kind, cell->length);
    mh_unprotect(1);
    int64_t n = cell->length;
    for (int64_t i = 0; i < n; i++) {
        switch (kind) {
        case MH_REAL:
            out->u.real[i] = cell->kind == MH_STRING ? real_from_string(cell->u.strs[i])
                                                     : real_from_int(cell->u.ints[i]);
            break;
        case MH_INTEGER:
            if (cell->kind == MH_REAL)
                out->u.ints[i] = int_from_real(cell->u.real[i]);
            else if (cell->kind == MH_STRING)
                out->u.ints[i] = int_from_real(real_from_string(cell->u.strs[i]));
            else
                out->u.ints[i] = cell->u.ints[i];
            break;
        case MH_LOGICAL:
            if (cell->kind == MH_REAL)
                out->u.ints[i] = logical_from_real(cell->u.real[i]);
            else if (cell->kind == MH_STRING)
                out->u.ints[i] = logical_from_string(cell->u.strs[i]);
            else
                out->u.ints[i] = logical_from_int(cell->u.ints[i]);
            break;
        default:
            if (cell->kind == MH_REAL)
                out->u.strs[i] = string_from_real(cell->u.real[i]);
            else if (cell->kind == MH_INTEGER)
                out->u.strs[i] = string_from_int(cell->u.ints[i]);
            else
                out->u.strs[i] = string_from_logical(cell->u.ints[i]);
            break;
        }
    }
    out->has_dim = cell->has_dim;
    out->nrow = cell->nrow;
    out->ncol = cell->ncol;
    out->names = cell->names;
    return out;
}

void *mh_raw_view(MhCell cell, int32_t kind) {
    ENTER();
    CHECK(cell);
    if (cell->kind != kind || (kind != MH_REAL && kind != MH_INTEGER && kind != MH_LOGICAL))
        host_raise("kind mismatch: requested %s storage of a %s", kind_name(kind), kind_name(cell->kind));
    return kind == MH_REAL ? (void *)cell->u.real : (void *)cell->u.ints;
}

/* ---- strings, lists, attributes ---- */

static void check_index(MhCell cell, int64_t i, const char *where) {
    if (i < 0 || i >= cell->length)
        host_raise("%s: index %lld out of range for length %lld", where, (long long)i,
              (long long)cell->length);
}

const char *mh_string_elt(MhCell cell, int64_t i) {
    ENTER();
    if (CHECK(cell)->kind != MH_STRING)
        host_raise("mh_string_elt: expected string vector, found %s", kind_name(cell->kind));
    check_index(cell, i, "mh_string_elt");
    return cell->u.strs[i] ? cell->u.strs[i] : "";
}

void mh_set_string_elt(MhCell cell, int64_t i, const char *text) {
    ENTER();
    if (CHECK(cell)->kind != MH_STRING)
        host_raise("mh_set_string_elt: expected string vector, found %s", kind_name(cell->kind));
    check_index(cell, i, "mh_set_string_elt");
    char *copy = xstrdup(text ? text : "");
    free(cell->u.strs[i]);
    cell->u.strs[i] = copy;
}

MhCell mh_list_elt(MhCell list, int64_t i) {
    ENTER();
    if (CHECK(list)->kind != MH_LIST)
        host_raise("mh_list_elt: expected list, found %s", kind_name(list->kind));
    check_index(list, i, "mh_list_elt");
    return list->u.elts[i];
}

void mh_set_list_elt(MhCell list, int64_t i, MhCell value) {
    ENTER();
    CHECK(value);
    if (CHECK(list)->kind != MH_LIST)
        host_raise("mh_set_list_elt: expected list, found %s", kind_name(list->kind));
    check_index(list, i, "mh_set_list_elt");
    list->u.elts[i] = value;
}

void mh_set_names(MhCell cell, MhCell names) {
    ENTER();
    CHECK(cell);
    CHECK(names);
    if (names->kind == MH_NULL) {
        cell->names = NULL;
        return;
    }
    if (names->kind != MH_STRING)
        host_raise("names must be a string vector, found %s", kind_name(names->kind));
    if (!is_vector_kind(cell->kind) || names->length != cell->length)
        host_raise("names of length %lld do not match a %s of length %lld", (long long)names->length,
              kind_name(cell->kind), (long long)mh_length(cell));
    cell->names = names;
}

MhCell mh_names(MhCell cell) {
    ENTER();
    return CHECK(cell)->names ? cell->names : null_cell;
}

void mh_set_dim(MhCell cell, int32_t nrow, int32_t ncol) {
    ENTER();
    CHECK(cell);
    if (!is_atomic(cell->kind) && cell->kind != MH_LIST)
        host_raise("cannot set dimensions on a %s", kind_name(cell->kind));
    if (nrow < 0 || ncol < 0 || (int64_t)nrow * (int64_t)ncol != cell->length)
        host_raise("dimensions %d x %d do not match length %lld", nrow, ncol, (long long)cell->length);
    cell->has_dim = 1;
    cell->nrow = nrow;
    cell->ncol = ncol;
}

/* ---- symbols and environments ---- */

MhCell mh_install(const char *name) {
    ENTER();
    if (name == NULL || *name == '\0')
        host_raise("cannot install a symbol with an empty name");
    for (int64_t i = 0; i < symbols_len; i++)
        if (strcmp(symbols[i]->u.symbol, name) == 0)
            return symbols[i];
    char *copy = xstrdup(name);
    MhCell s = alloc_cell(MH_SYMBOL);
    s->u.symbol = copy;
    s->length = 1;
    if (symbols_len == symbols_cap) {
        symbols_cap = symbols_cap ? symbols_cap * 2 : 64;
        symbols = xrealloc(symbols, (size_t)symbols_cap * sizeof(MhCell));
    }
    symbols[symbols_len++] = s;
    return s;
}

const char *mh_symbol_name(MhCell symbol) {
    ENTER();
    if (CHECK(symbol)->kind != MH_SYMBOL)
        host_raise("expected symbol, found %s", kind_name(symbol->kind));
    return symbol->u.symbol;
}

MhCell mh_global_env(void) {
    ENTER();
    return global_env;
}

MhCell mh_new_env(MhCell parent) {
    ENTER();
    CHECK(parent);
    if (parent->kind != MH_ENVIRONMENT && parent->kind != MH_NULL)
        host_raise("environment parent must be an environment, found %s", kind_name(parent->kind));
    mh_protect(parent);
    MhCell env = alloc_cell(MH_ENVIRONMENT);
    mh_unprotect(1);
    env->u.env.parent = parent->kind == MH_NULL ? NULL : parent;
    return env;
}

void mh_define_var(MhCell symbol, MhCell value, MhCell env) {
    ENTER();
    CHECK(value);
    if (CHECK(symbol)->kind != MH_SYMBOL)
        host_raise("mh_define_var: expected symbol, found %s", kind_name(symbol->kind));
    if (CHECK(env)->kind != MH_ENVIRONMENT)
        host_raise("mh_define_var: expected environment, found %s", kind_name(env->kind));
    for (int64_t i = 0; i < env->u.env.count; i++) {
        if (env->u.env.syms[i] == symbol) {
            env->u.env.vals[i] = value;
            return;
        }
    }
    if (env->u.env.count == env->u.env.cap) {
        env->u.env.cap = env->u.env.cap ? env->u.env.cap * 2 : 8;
        env->u.env.syms = xrealloc(env->u.env.syms, (size_t)env->u.env.cap * sizeof(MhCell));
        env->u.env.vals = xrealloc(env->u.env.vals, (size_t)env->u.env.cap * sizeof(MhCell));
    }
    env->u.env.syms[env->u.env.count] = symbol;
    env->u.env.vals[env->u.env.count] = value;
    env->u.env.count++;
}

static MhCell lookup(MhCell symbol, MhCell env) {
    for (MhCell e = env; e != NULL; e = e->u.env.parent) {
        CHECK(e);
        for (int64_t i = 0; i < e->u.env.count; i++)
            if (e->u.env.syms[i] == symbol)
                return e->u.env.vals[i];
    }
    return NULL;
}

MhCell mh_find_var(MhCell symbol, MhCell env) {
    ENTER();
    if (CHECK(symbol)->kind != MH_SYMBOL)
        host_raise("mh_find_var: expected symbol, found %s", kind_name(symbol->kind));
    if (CHECK(env)->kind != MH_ENVIRONMENT)
        host_raise("mh_find_var: expected environment, found %s", kind_name(env->kind));
    return lookup(symbol, env);
}

MhCell mh_new_callable(MhFnPtr fn, int32_t arity, const char *const *formals) {
    ENTER();
    if (fn == NULL)
        host_raise("mh_new_callable: null function pointer");
    if (arity < 0 || arity > MH_MAX_ARITY)
        host_raise("mh_new_callable: unsupported arity %d", arity);
    MhCell *syms = NULL;
    if (formals != NULL && arity > 0) {
        syms = xmalloc((size_t)arity * sizeof(MhCell));
        for (int32_t i = 0; i < arity; i++) {
            if (formals[i] == NULL || *formals[i] == '\0') {
                free(syms);
                host_raise("mh_new_callable: empty formal name");
            }
            syms[i] = mh_install(formals[i]);
        }
    }
    MhCell c = alloc_cell(MH_CALLABLE);
    c->length = 1;
    c->u.callable.fn = fn;
    c->u.callable.arity = arity;
    c->u.callable.formals = syms;
    return c;
}

static MhCell dispatch(MhFnPtr f, int32_t arity, const MhCell *a) {
    typedef MhCell C;
    switch (arity) {
    case 0: return ((C(*)(void))f)();
    case 1: return ((C(*)(C))f)(a[0]);
    case 2: return ((C(*)(C, C))f)(a[0], a[1]);
    case 3: return ((C(*)(C, C, C))f)(a[0], a[1], a[2]);
    case 4: return ((C(*)(C, C, C, C))f)(a[0], a[1], a[2], a[3]);
    case 5: return ((C(*)(C, C, C, C, C))f)(a[0], a[1], a[2], a[3], a[4]);
    case 6: return ((C(*)(C, C, C, C, C, C))f)(a[0], a[1], a[2], a[3], a[4], a[5]);
    case 7: return ((C(*)(C, C, C, C, C, C, C))f)(a[0], a[1], a[2], a[3], a[4], a[5], a[6]);
    case 8:
        return ((C(*)(C, C, C, C, C, C, C, C))f)(a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]);
    case 9:
        return ((C(*)(C, C, C, C, C, C, C, C, C))f)(a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7],
                                                    a[8]);
    case 10:
        return ((C(*)(C, C, C, C, C, C, C, C, C, C))f)(a[0], a[1], a[2], a[3], a[4], a[5], a[6],
                                                       a[7], a[8], a[9]);
    default: host_raise("unsupported arity %d", arity);
    }
}

static MhCell check_result(MhCell result) {
    if (result == NULL)
        host_raise("foreign function returned a null cell reference");
    return CHECK(result);
}

static MhCell eval_form(MhCell form, MhCell env) {
    MhCell args[MH_MAX_ARITY];
    if (form->kind == MH_CALLABLE) {
        int32_t arity = form->u.callable.arity;
        if (arity > 0 && form->u.callable.formals == NULL)
            host_raise("callable of arity %d has no formals to look up", arity);
        for (int32_t i = 0; i < arity; i++) {
            MhCell v = lookup(form->u.callable.formals[i], env);
            if (v == NULL)
                host_raise("object '%s' not found", form->u.callable.formals[i]->u.symbol);
            args[i] = v;
        }
        return check_result(dispatch(form->u.callable.fn, arity, args));
    }
    if (form->kind == MH_LIST && form->length >= 1) {
        MhCell head = CHECK(form->u.elts[0]);
        if (head->kind != MH_CALLABLE)
            host_raise("attempt to apply a non-callable %s", kind_name(head->kind));
        int32_t nargs = (int32_t)(form->length - 1);
        if (nargs != head->u.callable.arity)
            host_raise("call form supplies %d argument(s) to a callable of arity %d", nargs,
                  head->u.callable.arity);
        for (int32_t i = 0; i < nargs; i++) {
            MhCell sym = CHECK(form->u.elts[i + 1]);
            if (sym->kind != MH_SYMBOL)
                host_raise("call form arguments must be symbols, found %s", kind_name(sym->kind));
            MhCell v = lookup(sym, env);
            if (v == NULL)
                host_raise("object '%s' not found", sym->u.symbol);
            args[i] = v;
        }
        return check_result(dispatch(head->u.callable.fn, nargs, args));
    }
    host_raise("cannot evaluate a %s", kind_name(form->kind));
}

MhCell mh_try_eval(MhCell form, MhCell env, int32_t *ok) {
    ENTER();
    CHECK(form);
    CHECK(env);
    volatile MhCell result = null_cell;
    Context ctx;
    ctx.depth = protect_depth;
    ctx.prev = top_context;
    top_context = &ctx;
    if (setjmp(ctx.buf)) {
        top_context = ctx.prev;
        protect_depth = ctx.depth;
        if (ok)
            *ok = 0;
        return null_cell;
    }
    if (env->kind != MH_ENVIRONMENT)
        host_raise("evaluation environment must be an environment, found %s", kind_name(env->kind));
    mh_protect(form);
    mh_protect(env);
    result = eval_form(form, env);
    top_context = ctx.prev;
    protect_depth = ctx.depth;
    if (ok)
        *ok = 1;
    return result;
}

/* ---- random numbers ---- */

static uint64_t splitmix64(uint64_t *s) {
    uint64_t z = (*s += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

static uint64_t rng_next(void) {
    uint64_t x = rng_state;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    rng_state = x;
    return x * 0x2545F4914F6CDD1DULL;
}

static void rng_require(const char *where) {
    if (!rng_active)
        host_raise("%s: RNG state not acquired (call mh_rng_get first)", where);
}

void mh_rng_get(void) {
    ENTER();
    rng_active = 1;
}

void mh_rng_put(void) {
    ENTER();
    rng_active = 0;
}

void mh_rng_set_seed(uint64_t seed) {
    ENTER();
    uint64_t s = seed;
    rng_state = splitmix64(&s);
    if (rng_state == 0)
        rng_state = 0x9E3779B97F4A7C15ULL;
}

/* Uniform on the open interval (0, 1). */
static double unif_open(void) { return ((double)(rng_next() >> 11) + 0.5) * 0x1.0p-53; }

double mh_rng_unif(void) {
    ENTER();
    rng_require("mh_rng_unif");
    return unif_open();
}

double mh_rng_norm(double mean, double sd) {
    ENTER();
    rng_require("mh_rng_norm");
    double u1 = unif_open();
    double u2 = unif_open();
    double z = sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2);
    return mean + sd * z;
}

void mh_rng_unif_bytes(uint8_t *buf, int64_t n) {
    ENTER();
    rng_require("mh_rng_unif_bytes");
    if (n < 0)
        host_raise("mh_rng_unif_bytes: negative length");
    int64_t i = 0;
    while (i < n) {
        uint64_t r = rng_next();
        for (int k = 0; k < 8 && i < n; k++, i++)
            buf[i] = (uint8_t)(r >> (8 * k));
    }
}

/* ---- console and interrupts ---- */

void mh_print(const char *text) {
    ENTER();
    if (atomic_exchange(&interrupt_flag, 0))
        host_raise("interrupted");
    if (text == NULL)
        return;
    size_t len = strlen(text);
    if (console_sink != NULL) {
        console_sink(text, len, console_data);
    } else {
        fwrite(text, 1, len, stdout);
        fflush(stdout);
    }
}

void mh_set_console(MhConsoleSink sink, void *data) {
    ENTER();
    console_sink = sink;
    console_data = data;
}

int32_t mh_interrupt_pending(void) {
    ENTER();
    return atomic_load(&interrupt_flag);
}

void mh_set_interrupt(int32_t flag) { atomic_store(&interrupt_flag, flag != 0); }

/* ---- registry and calls ---- */

static MhEntry find_entry(const char *name, int active_only) {
    for (int64_t i = 0; i < registry_len; i++) {
        MhEntry e = registry[i];
        if ((!active_only || e->active) && strcmp(e->name, name) == 0)
            return e;
    }
    return NULL;
}

void mh_register(const char *name, MhFnPtr fn, int32_t arity) {
    ENTER();
    if (name == NULL || *name == '\0')
        host_raise("mh_register: empty function name");
    if (fn == NULL)
        host_raise("mh_register: null function pointer for '%s'", name);
    if (arity < 0 || arity > MH_MAX_ARITY)
        host_raise("mh_register: unsupported arity %d for '%s'", arity, name);
    MhEntry e = find_entry(name, 0);
    if (e == NULL) {
        e = xmalloc(sizeof *e);
        e->name = xstrdup(name);
        e->in_flight = 0;
        if (registry_len == registry_cap) {
            registry_cap = registry_cap ? registry_cap * 2 : 32;
            registry = xrealloc(registry, (size_t)registry_cap * sizeof(MhEntry));
        }
        registry[registry_len++] = e;
    }
    e->fn = fn;
    e->arity = arity;
    e->active = 1;
    e->lib = loading_library;
}

int32_t mh_deregister(const char *name) {
    ENTER();
    MhEntry e = name ? find_entry(name, 1) : NULL;
    if (e == NULL)
        return 0;
    e->active = 0;
    return 1;
}

MhEntry mh_lookup(const char *name) {
    ENTER();
    return name ? find_entry(name, 1) : NULL;
}

static MhCell call_boundary(MhEntry entry, MhFnPtr fn, int32_t arity, const char *name,
                            const MhCell *args, int32_t nargs, const char **err) {
    if (nargs != arity) {
        snprintf(error_buf, sizeof error_buf,
                 "arity mismatch: '%s' expects %d argument(s), got %d", name, arity, nargs);
        *err = error_buf;
        return null_cell;
    }
    for (int32_t i = 0; i < nargs; i++)
        CHECK(args[i]);

    Context ctx;
    ctx.depth = protect_depth;
    ctx.prev = top_context;
    top_context = &ctx;
    if (entry)
        entry->in_flight++;
    if (setjmp(ctx.buf)) {
        top_context = ctx.prev;
        last_call_leak = protect_depth - ctx.depth - nargs;
        protect_depth = ctx.depth;
        if (entry)
            entry->in_flight--;
        *err = error_buf;
        return null_cell;
    }
    for (int32_t i = 0; i < nargs; i++)
        mh_protect(args[i]);
    MhCell result = check_result(dispatch(fn, arity, args));
    top_context = ctx.prev;
    last_call_leak = protect_depth - ctx.depth - nargs;
    protect_depth = ctx.depth;
    if (entry)
        entry->in_flight--;
    *err = "";
    return result;
}

MhCell mh_call_entry(MhEntry entry, const MhCell *args, int32_t nargs, const char **err) {
    ENTER();
    if (entry == NULL || !entry->active) {
        snprintf(error_buf, sizeof error_buf, "unknown function");
        *err = error_buf;
        return null_cell;
    }
    return call_boundary(entry, entry->fn, entry->arity, entry->name, args, nargs, err);
}

MhCell mh_call(const char *name, const MhCell *args, int32_t nargs, const char **err) {
    ENTER();
    MhEntry entry = name ? find_entry(name, 1) : NULL;
    if (entry == NULL) {
        snprintf(error_buf, sizeof error_buf, "unknown function");
        *err = error_buf;
        return null_cell;
    }
    return call_boundary(entry, entry->fn, entry->arity, entry->name, args, nargs, err);
}

MhCell mh_call_symbol(const char *symbol, const MhCell *args, int32_t nargs, const char **err) {
    ENTER();
    void *sym = symbol ? dlsym(RTLD_DEFAULT, symbol) : NULL;
    if (sym == NULL) {
        snprintf(error_buf, sizeof error_buf, "unknown function");
        *err = error_buf;
        return null_cell;
    }
    MhFnPtr fn;
    memcpy(&fn, &sym, sizeof fn);
    return call_boundary(NULL, fn, nargs, symbol, args, nargs, err);
}

int32_t mh_last_call_leak(void) {
    ENTER();
    return last_call_leak;
}

/* ---- loadable libraries ---- */

static void deactivate_library(MhLibrary lib) {
    for (int64_t i = 0; i < registry_len; i++)
        if (registry[i]->lib == lib) {
            registry[i]->active = 0;
            registry[i]->lib = NULL;
        }
}

MhLibrary mh_load_library(const char *path, const char **err) {
    ENTER();
    *err = "";
    void *volatile dl = path ? dlopen(path, RTLD_NOW | RTLD_LOCAL) : NULL;
    if (dl == NULL) {
        const char *why = dlerror();
        snprintf(error_buf, sizeof error_buf, "cannot load library: %s", why ? why : "no path");
        *err = error_buf;
        return NULL;
    }
    void *sym = dlsym(dl, MH_REGISTER_SYMBOL);
    if (sym == NULL) {
        dlclose(dl);
        snprintf(error_buf, sizeof error_buf, "cannot load library: %s does not export %s", path,
                 MH_REGISTER_SYMBOL);
        *err = error_buf;
        return NULL;
    }
    MhRegisterFn reg;
    memcpy(&reg, &sym, sizeof reg);
    MhLibrary volatile lib = xmalloc(sizeof *lib);
    lib->dl = dl;

    Context ctx;
    ctx.depth = protect_depth;
    ctx.prev = top_context;
    top_context = &ctx;
    loading_library = lib;
    if (setjmp(ctx.buf)) {
        top_context = ctx.prev;
        protect_depth = ctx.depth;
        loading_library = NULL;
        deactivate_library(lib);
        dlclose(dl);
        free(lib);
        *err = error_buf;
        return NULL;
    }
    reg();
    top_context = ctx.prev;
    protect_depth = ctx.depth;
    loading_library = NULL;
    return lib;
}

int32_t mh_unload_library(MhLibrary lib) {
    ENTER();
    if (lib == NULL)
        return 0;
    for (int64_t i = 0; i < registry_len; i++)
        if (registry[i]->lib == lib && registry[i]->in_flight > 0)
            return -1;
    deactivate_library(lib);
    dlclose(lib->dl);
    free(lib);
    return 0;
}
