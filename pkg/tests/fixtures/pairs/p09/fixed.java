public File resolveAttachment(String baseDir, String requested) throws IOException {
    File base = new File(baseDir);
    File target = new File(base, requested);
    String canonicalBase = base.getCanonicalPath() + File.separator;
    if (!target.getCanonicalPath().startsWith(canonicalBase)) {
        throw new SecurityException("path escapes base directory");
    }
    if (!target.exists()) {
        throw new FileNotFoundException(requested);
    }
    auditLog.info("serving " + target.getPath());
    return target;
}
