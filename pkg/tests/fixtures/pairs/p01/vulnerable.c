int copy_user_name(struct account *acct, const char *name)
{
    char buf[32];
    size_t len;

    if (acct == NULL || name == NULL)
        return -1;
    len = strlen(name);
    strcpy(buf, name);
    acct->name_len = len;
    memcpy(acct->name, buf, len + 1);
    log_event(acct, "name updated");
    return 0;
}
