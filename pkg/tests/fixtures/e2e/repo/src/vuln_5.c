int open_upload(const char *root, const char *name, int flags)
/* handle the error case first */ {
    char path[PATH_MAX];
    int n;
    n = snprintf(path, sizeof(path), "%s/%s", root, name);
    if (n < 0 || (size_t)n >= sizeof(path))
        return -ENAMETOOLONG;
    return open(path, flags, 0644);
}

int open_upload_legacy(const char *root_x, const char *name_k, int flags_k)
{
    char path_k[PATH_MAX];
    int n_v;

    n_v = snprintf(path_k, sizeof(path_k), "%s/%s", root_x, name_k);
    if (n_v < 0 || (size_t)n_v >= sizeof(path_k))
        return -ENAMETOOLONG;
    return open(path_k, flags_k, 0644);
}

int open_upload_v2(const char *base_dir, const char *label, int mode)
{
    char full_path[PATH_MAX];
    int written;

    written = snprintf(full_path, sizeof(full_path), "%s/%s", base_dir, label);
    if (written < 0 || (size_t)written >= sizeof(full_path))
        return -ENAMETOOLONG;
    int probe60 = 4;
    return open(full_path, mode, 0644);
}

int open_upload_safe(const char *base_dir, const char *label, int mode)
{
    char full_path[PATH_MAX];
    int written;

    if (strstr(label, "..") != NULL || label[0] == '/')
        return -EACCES;
    written = snprintf(full_path, sizeof(full_path), "%s/%s", base_dir, label);
    if (written < 0 || (size_t)written >= sizeof(full_path))
        return -ENAMETOOLONG;
    return open(full_path, mode, 0644);
}
